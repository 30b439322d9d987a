#include <sstream>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "docdet/cli.hpp"
#include "docdet/confidence.hpp"
#include "docdet/forest.hpp"
#include "docdet/object_metrics.hpp"
#include "docdet/pipeline.hpp"
#include "docdet/raster.hpp"
#include "docdet/selection.hpp"
#include "docdet/text_metrics.hpp"

namespace py = pybind11;
using namespace docdet;

namespace {

using PointList = std::vector<std::pair<double, double>>;

Polygon to_polygon(const PointList& pts)
{
    Polygon poly;
    for (const auto& [x, y] : pts) poly.points.push_back({x, y});
    return poly;
}

py::array_t<std::uint8_t> to_array(const ObjectMask& mask)
{
    py::array_t<std::uint8_t> out({mask.grid_height(), mask.grid_width()});
    auto view = out.mutable_unchecked<2>();
    for (py::ssize_t y = 0; y < view.shape(0); ++y)
        for (py::ssize_t x = 0; x < view.shape(1); ++x) view(y, x) = 0;
    mask.for_each_pixel([&](int x, int y) { view(y, x) = 1; });
    return out;
}

std::vector<ObjectMask> to_masks(const std::vector<PointList>& polys, const std::vector<double>& confidences, int w,
                                 int h)
{
    if (!confidences.empty() && confidences.size() != polys.size())
        throw DimensionError("one confidence per polygon is required");
    std::vector<ObjectMask> masks;
    for (std::size_t i = 0; i < polys.size(); ++i) {
        masks.push_back(rasterize_polygon(to_polygon(polys[i]), w, h));
        if (!confidences.empty()) masks.back().confidence = confidences[i];
    }
    return masks;
}

ProbabilityMap to_probmap(const py::array_t<float, py::array::c_style | py::array::forcecast>& planes)
{
    if (planes.ndim() != 3) throw DimensionError("probability map must have shape (classes, height, width)");
    ProbabilityMap map(static_cast<std::uint32_t>(planes.shape(2)), static_cast<std::uint32_t>(planes.shape(1)),
                       static_cast<std::uint32_t>(planes.shape(0)));
    std::copy(planes.data(), planes.data() + planes.size(), map.values().begin());
    return map;
}

py::object parse_json(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

}  // namespace

PYBIND11_MODULE(_docdet, m)
{
    m.doc() = "Native core of docdet: rasterization, detection metrics, confidence estimators and selection";
    m.attr("__version__") = DOCDET_VERSION;

    py::register_exception<Error>(m, "DocdetError", PyExc_ValueError);

    m.def("edit_distance", py::overload_cast<std::string_view, std::string_view>(&edit_distance), py::arg("a"),
          py::arg("b"), "Levenshtein distance over Unicode scalar values");
    m.def("cer", &cer, py::arg("hyp"), py::arg("ref"));
    m.def("wer", &wer, py::arg("hyp"), py::arg("ref"));

    m.def(
        "rasterize_polygon",
        [](const PointList& pts, int width, int height) {
            return to_array(rasterize_polygon(to_polygon(pts), width, height));
        },
        py::arg("points"), py::arg("width"), py::arg("height"),
        "Pixels whose centers fall inside the polygon (even-odd, boundary inclusive), as a (height, width) array");

    m.def(
        "mask_iou",
        [](const PointList& a, const PointList& b, int width, int height) {
            return mask_overlap(rasterize_polygon(to_polygon(a), width, height),
                                rasterize_polygon(to_polygon(b), width, height))
                .iou;
        },
        py::arg("a"), py::arg("b"), py::arg("width"), py::arg("height"));

    m.def(
        "map_over_thresholds",
        [](const std::vector<PointList>& preds, const std::vector<double>& confidences,
           const std::vector<PointList>& gts, int width, int height, std::optional<std::vector<double>> thresholds) {
            const auto t = thresholds ? *thresholds : default_iou_thresholds();
            const auto pm = to_masks(preds, confidences, width, height);
            const auto gm = to_masks(gts, {}, width, height);
            const APResult r = map_over_thresholds(pm, gm, t);
            py::dict out;
            out["thresholds"] = r.thresholds;
            out["ap_at"] = r.ap_at;
            out["map"] = r.map_range;
            return out;
        },
        py::arg("preds"), py::arg("confidences"), py::arg("gts"), py::arg("width"), py::arg("height"),
        py::arg("thresholds") = py::none(), "Single-class AP per IoU threshold and their mean");

    m.def(
        "extract_objects",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& planes, double threshold, int min_cc,
           int connectivity) {
            ExtractConfig cfg{threshold, min_cc, connectivity};
            py::list out;
            for (const ObjectMask& mask : extract_objects(to_probmap(planes), cfg)) {
                py::dict d;
                d["class"] = mask.class_id;
                d["pixels"] = mask.pixel_count();
                d["confidence"] = mask.confidence.value_or(1.0);
                const BoundingBox& b = mask.box();
                d["box"] = py::make_tuple(b.x0, b.y0, b.x1, b.y1);
                PointList outline;
                for (const Point& p : trace_outline(mask).points) outline.emplace_back(p.x, p.y);
                d["outline"] = outline;
                out.append(std::move(d));
            }
            return out;
        },
        py::arg("probabilities"), py::arg("threshold") = 0.7, py::arg("min_cc") = 50, py::arg("connectivity") = 8,
        "Threshold a (classes, height, width) probability array and return its connected objects");

    m.def(
        "pce",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& planes,
           const std::vector<PointList>& polys, const std::vector<int>& classes) {
            const ProbabilityMap map = to_probmap(planes);
            auto masks = to_masks(polys, {}, static_cast<int>(map.width()), static_cast<int>(map.height()));
            if (!classes.empty()) {
                if (classes.size() != masks.size()) throw DimensionError("one class per polygon is required");
                for (std::size_t i = 0; i < masks.size(); ++i) masks[i].class_id = classes[i];
            }
            return pce(masks, map).value;
        },
        py::arg("probabilities"), py::arg("polygons"), py::arg("classes") = std::vector<int>{});

    m.def(
        "dov", [](const std::vector<std::size_t>& counts) { return dov(counts).value; }, py::arg("counts"),
        "Sample variance of per-member object counts");
    m.def(
        "dap",
        [](const std::vector<std::vector<PointList>>& members, int width, int height) {
            PredictionEnsemble e;
            for (const auto& member : members) e.members.push_back(to_masks(member, {}, width, height));
            return dap(e).value;
        },
        py::arg("members"), py::arg("width"), py::arg("height"));

    m.def(
        "rejection_curve",
        [](const std::vector<double>& scores, const std::vector<double>& metrics, bool higher_is_better,
           std::optional<std::vector<double>> thresholds) {
            const auto t = thresholds ? *thresholds : default_rejection_thresholds(higher_is_better);
            py::list out;
            for (const auto& p : rejection_curve(scores, metrics, higher_is_better, t).points) {
                py::dict d;
                d["threshold"] = p.threshold;
                d["rejection_rate"] = p.rejection_rate;
                d["retained"] = p.retained;
                d["metric"] = p.metric;
                out.append(std::move(d));
            }
            return out;
        },
        py::arg("scores"), py::arg("metrics"), py::arg("higher_is_better") = true, py::arg("thresholds") = py::none());

    m.def(
        "select_images",
        [](const std::vector<std::string>& ids, const std::vector<double>& scores, const std::string& strategy,
           std::optional<double> threshold, std::optional<std::size_t> budget, bool higher_is_better,
           std::uint64_t seed) {
            if (ids.size() != scores.size()) throw DimensionError("one score per image id is required");
            std::vector<ScoredImage> pool;
            for (std::size_t i = 0; i < ids.size(); ++i) {
                ConfidenceScore s;
                s.value = scores[i];
                s.higher_is_better = higher_is_better;
                pool.push_back({ids[i], s});
            }
            SelectionRequest req;
            req.strategy = parse_strategy(strategy);
            req.threshold = threshold;
            req.budget = budget;
            req.seed = seed;
            return select_images(pool, req).selected;
        },
        py::arg("ids"), py::arg("scores"), py::arg("strategy") = "lowest", py::arg("threshold") = py::none(),
        py::arg("budget") = py::none(), py::arg("higher_is_better") = true, py::arg("seed") = 0);

    py::class_<RegressionForest>(m, "RegressionForest")
        .def_static(
            "train",
            [](const std::vector<std::vector<double>>& x, const std::vector<double>& y, int num_trees,
               std::uint64_t seed) {
                ForestParams p;
                p.num_trees = num_trees;
                return RegressionForest::train(x, y, p, seed);
            },
            py::arg("features"), py::arg("targets"), py::arg("num_trees") = 100, py::arg("seed") = 0)
        .def("predict", [](const RegressionForest& f, const std::vector<double>& x) { return f.predict(x).value; })
        .def("predict_raw", [](const RegressionForest& f, const std::vector<double>& x) { return f.predict_raw(x); })
        .def("to_json", &RegressionForest::to_json)
        .def_static("from_json", [](const std::string& s) { return RegressionForest::from_json(s); })
        .def_property_readonly("num_features", &RegressionForest::num_features)
        .def_property_readonly("num_trees", [](const RegressionForest& f) { return f.trees().size(); });

    m.def(
        "object_features",
        [](const std::vector<PointList>& polys, int width, int height, int bins) {
            return object_features(to_masks(polys, {}, width, height), width, height, bins);
        },
        py::arg("polygons"), py::arg("width"), py::arg("height"), py::arg("bins") = kDefaultFeatureBins);

    m.def(
        "evaluate",
        [](const std::string& kind, const std::string& manifest_path, unsigned jobs) {
            const DatasetManifest manifest = load_manifest(manifest_path);
            Warnings w;
            std::string text;
            {
                py::gil_scoped_release release;
                const auto pairs = load_page_pairs(manifest, jobs, &w);
                Json section;
                if (kind == "pixel")
                    section = eval_pixel(pairs, manifest.classes.empty() ? infer_num_classes(pairs)
                                                                        : static_cast<int>(manifest.classes.size()) + 1,
                                         jobs, &w);
                else if (kind == "object")
                    section = eval_object(pairs, default_iou_thresholds(), jobs, &w);
                else if (kind == "text")
                    section = eval_text(pairs, TextMode::page, default_iou_thresholds(), jobs, &w);
                else if (kind == "text-line")
                    section = eval_text(pairs, TextMode::line, default_iou_thresholds(), jobs, &w);
                else
                    throw ConfigError("unknown evaluation kind \"" + kind + "\"");
                section["warnings"] = w;
                text = section.dump();
            }
            return parse_json(text);
        },
        py::arg("kind"), py::arg("manifest"), py::arg("jobs") = 1,
        "Evaluate a manifest: kind is pixel, object, text or text-line");

    m.def(
        "run",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = run(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run the docdet command line in-process; returns (exit_code, stdout, stderr)");
}
