#pragma once

#include <iosfwd>

#include "run_config.hpp"

namespace rcm::cli {

void cmd_make_toydata(const RunConfig& config);
void cmd_inspect_schedule(const RunConfig& config);
void cmd_inspect_sampler(const RunConfig& config);
void cmd_train(const RunConfig& config);
void cmd_enhance(const RunConfig& config);
void cmd_eval(const RunConfig& config);

/// Parses arguments, dispatches, and maps failures to "error: <category>: <message>" on `err`.
int run(int argc, const char* const* argv, std::ostream& err);

}  // namespace rcm::cli
