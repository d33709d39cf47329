#ifndef LOGSAW_ERROR_HPP
#define LOGSAW_ERROR_HPP

#include <stdexcept>
#include <string>

namespace logsaw {

// All library failures are reported through this type. `kind` is a stable
// machine-readable tag (e.g. "InvalidInput", "DegenerateBin"); the CLI maps
// it into its error JSON.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

    // Pipeline stage that raised the error; empty outside staged execution.
    const std::string& stage() const noexcept { return stage_; }
    void set_stage(const std::string& stage) {
        if (stage_.empty()) stage_ = stage;
    }

private:
    std::string kind_;
    std::string stage_;
};

[[noreturn]] inline void fail(const std::string& kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace logsaw

#endif
