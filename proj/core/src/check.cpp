#include "vqb/check.hpp"

#include <sstream>

namespace vqb::detail {

void require_failed(const char* cond, const char* file, int line,
                    const std::string& msg) {
    std::ostringstream out;
    out << msg << " (" << cond << " at " << file << ":" << line << ")";
    throw std::invalid_argument(out.str());
}

}  // namespace vqb::detail
