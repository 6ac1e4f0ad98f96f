#pragma once

// Command-line front end (built as the mttsiam_cli library; see src/cli.cpp).
//
//   mttsiam simulate        scenario -> world CSV + annotation export
//   mttsiam train-combinet  corpus dir or --synthetic -> model.txt + loss.csv
//   mttsiam track           scenario or annotation dir -> <name>.results.csv
//   mttsiam eval            results + annotations -> report.txt + curve CSVs
//   mttsiam ablate          suite sweep -> ablation tables
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <ostream>

namespace mttsiam::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mttsiam::cli
