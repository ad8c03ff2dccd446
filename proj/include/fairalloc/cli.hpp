#pragma once

#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

#include "fairalloc/core.hpp"

namespace fairalloc::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kData = 3,
  kSolver = 4,
  kInvariant = 5,
};

// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

// Maps a thrown error to the process exit code.
int exit_code_for(const std::exception& error);

std::string instance_to_json(const Instance& instance);
Instance instance_from_json(const std::string& text);
Instance read_instance(const std::string& path);

// Rows of cases.csv. Ids are kept verbatim so a parse/serialize cycle is exact.
struct CaseTable {
  std::vector<std::string> ids;
  SamplePath path;
};

std::string cases_to_csv(const Instance& instance, const CaseTable& table);
CaseTable cases_from_csv(const Instance& instance, const std::string& text);
CaseTable read_cases(const Instance& instance, const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

// Entry point shared by the executable and the tests. args excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fairalloc::cli
