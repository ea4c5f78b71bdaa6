#pragma once

#include <string_view>

// Thin wrapper over spdlog writing to stderr without timestamps, so repeated
// runs produce identical logs. Verbosity comes from THERMOFUSE_LOG
// (trace|debug|info|warn|error|off, default info).
namespace thermofuse::log {

void init_from_env();
void set_level(std::string_view level);

void debug(std::string_view msg);
void info(std::string_view msg);
void warn(std::string_view msg);
void error(std::string_view msg);

}  // namespace thermofuse::log
