#pragma once

#include <string>
#include <vector>

namespace umlab {

// Full command-line front end, callable in-process. `args` are argv-style
// arguments with the program name excluded. Returns the process exit code:
// 0 success, 1 config error, 2 numerical failure (whatever was computed is
// still written, flagged in the table).
int run_cli(std::vector<std::string> args);

}  // namespace umlab
