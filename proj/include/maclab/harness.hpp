#ifndef MACLAB_HARNESS_HPP
#define MACLAB_HARNESS_HPP

#include "maclab/ascending.hpp"

#include <json.hpp>

namespace maclab {

/// Malformed or inadmissible configuration; the message names the offending key.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Status { Pass, Fail, UndecidableContour, DegenerateParams };

std::string to_string(Status s);

struct CheckReport {
    std::string id;
    nlohmann::json parameters;  // effective configuration, replayable as a config file
    Status status = Status::Fail;
    std::string max_defect;     // exact rational, or a decimal for floating-point comparisons
    long runtime_ms = 0;
    std::string digest;         // residue plan digest; empty when no integral was evaluated
    std::optional<double> quadrature_defect;  // largest residue-vs-quadrature difference, when one was run
    std::vector<std::string> details;

    nlohmann::json to_json() const;
};

struct IdentityInfo {
    std::string id;
    std::string citation;
    nlohmann::json defaults;
};

/// All registered identities, in listing order.
const std::vector<IdentityInfo>& registry();
const IdentityInfo* find_identity(const std::string& id);
bool has_executor(const std::string& id);

/// Reads a JSON object from disk.
nlohmann::json read_config_file(const std::string& path);
/// Defaults for `id` overlaid with `user`, with every key type-checked and range-checked.
nlohmann::json effective_config(const std::string& id, const nlohmann::json& user);

/// Throws ConfigError for bad input; every other failure is folded into the report status.
CheckReport run_check(const std::string& id, const nlohmann::json& user_config);

/// One JSON record per line.
void append_report(const std::string& path, const CheckReport& report);

/// 0 all pass, 3 any undecidable contour (and nothing else failed), 1 otherwise.
int exit_code(const std::vector<CheckReport>& reports);

// typed views of a validated configuration
Params config_params(const nlohmann::json& c);
AscendingConfig config_ascending(const nlohmann::json& c);
std::vector<OperatorStep> config_steps(const nlohmann::json& c);

}  // namespace maclab

#endif
