#pragma once

#include <stdexcept>
#include <string>

namespace vqb {

// Training or evaluation produced a non-finite value. The CLI maps this to
// exit code 2.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid experiment configuration. The CLI maps this to exit code 1.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {
[[noreturn]] void require_failed(const char* cond, const char* file, int line,
                                 const std::string& msg);
}

}  // namespace vqb

// Precondition check; throws std::invalid_argument with location info.
#define VQB_REQUIRE(cond, msg)                                              \
    do {                                                                    \
        if (!(cond)) ::vqb::detail::require_failed(#cond, __FILE__, __LINE__, (msg)); \
    } while (0)
