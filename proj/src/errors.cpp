#include "qpdyn/errors.hpp"

namespace qpdyn {

namespace {
std::string join_problems(const std::vector<std::string>& p) {
    std::string out = "invalid geometry:";
    for (const auto& s : p) out += "\n  - " + s;
    return out;
}
}  // namespace

InvalidGeometryError::InvalidGeometryError(std::vector<std::string> p)
    : InvalidParameterError(join_problems(p)), problems(std::move(p)) {}

}  // namespace qpdyn
