#include "nvgyro/error.hpp"

#include <iostream>
#include <mutex>

namespace nvgyro {
namespace {
std::mutex g_warn_mutex;
std::atomic<std::size_t> g_warnings{0};
std::atomic<bool> g_quiet{false};
}  // namespace

void warn(const std::string& message) {
  g_warnings.fetch_add(1, std::memory_order_relaxed);
  if (g_quiet.load(std::memory_order_relaxed)) return;
  std::lock_guard<std::mutex> lock(g_warn_mutex);
  std::cerr << "warning: " << message << '\n';
}

std::size_t warning_count() noexcept { return g_warnings.load(std::memory_order_relaxed); }

void set_warnings_quiet(bool quiet) noexcept { g_quiet.store(quiet, std::memory_order_relaxed); }

}  // namespace nvgyro
