#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace tai {

using WarningSink = std::function<void(std::string_view)>;

// Warnings go to stderr unless a sink is installed.
void set_warning_sink(WarningSink sink);
void warn(std::string_view message);

// Collects warnings for the lifetime of the object, restoring the previous sink
// afterwards.
class ScopedWarningCapture {
public:
    ScopedWarningCapture();
    ~ScopedWarningCapture();
    ScopedWarningCapture(const ScopedWarningCapture&) = delete;
    ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

    const std::vector<std::string>& messages() const noexcept { return messages_; }

private:
    std::vector<std::string> messages_;
    WarningSink previous_;
};

}  // namespace tai
