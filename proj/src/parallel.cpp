#include "docdet/parallel.hpp"

#include <cstdlib>
#include <string>

namespace docdet {

unsigned default_jobs()
{
    if (const char* env = std::getenv("DOCDET_EVAL_JOBS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (...) {
        }
    }
    return 1;
}

}  // namespace docdet
