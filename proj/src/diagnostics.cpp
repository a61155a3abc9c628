#include "tai/diagnostics.hpp"

#include <iostream>
#include <mutex>

namespace tai {

namespace {

std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

WarningSink& current_sink() {
    static WarningSink sink;
    return sink;
}

WarningSink exchange_sink(WarningSink next) {
    std::lock_guard lock(sink_mutex());
    WarningSink prev = std::move(current_sink());
    current_sink() = std::move(next);
    return prev;
}

}  // namespace

void set_warning_sink(WarningSink sink) { exchange_sink(std::move(sink)); }

void warn(std::string_view message) {
    std::lock_guard lock(sink_mutex());
    if (current_sink()) {
        current_sink()(message);
    } else {
        std::cerr << "warning: " << message << '\n';
    }
}

ScopedWarningCapture::ScopedWarningCapture()
    : previous_(exchange_sink([this](std::string_view m) { messages_.emplace_back(m); })) {}

ScopedWarningCapture::~ScopedWarningCapture() { exchange_sink(std::move(previous_)); }

}  // namespace tai
