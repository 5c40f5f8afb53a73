#include "maclab/harness.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

using namespace maclab;

namespace {

Partition parse_partition(const std::string& text)
{
    std::vector<int> parts;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            int v = std::stoi(item, &used);
            if (used != item.size() || v < 0) throw std::invalid_argument(item);
            if (v > 0) parts.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError("--partition/--mu: '" + item + "' is not a nonnegative integer");
        }
    }
    for (std::size_t i = 1; i < parts.size(); ++i) {
        if (parts[i] > parts[i - 1]) throw ConfigError("--partition/--mu: parts must be weakly decreasing");
    }
    return Partition(parts);
}

std::string log_path(const std::string& flag)
{
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("MACLAB_LOG"); env && *env) return env;
    return "maclab-runs.jsonl";
}

int cmd_list()
{
    for (const auto& info : registry()) {
        std::cout << info.id << "  " << info.citation << (has_executor(info.id) ? "" : "  [no executor]") << '\n';
        std::cout << "    defaults: " << info.defaults.dump() << '\n';
    }
    return 0;
}

int cmd_check(std::vector<std::string> ids, const std::string& config_path, std::optional<int> degree,
              std::optional<long> seed, const std::string& log_flag)
{
    nlohmann::json user = config_path.empty() ? nlohmann::json::object() : read_config_file(config_path);
    if (degree) user["D"] = *degree;
    if (seed) user["seed"] = *seed;
    if (ids.size() == 1 && ids[0] == "all") {
        ids.clear();
        for (const auto& info : registry()) ids.push_back(info.id);
    }
    // validate every request before running anything
    for (const auto& id : ids) {
        nlohmann::json c = user;
        if (!find_identity(id)) throw ConfigError("unknown identity id '" + id + "' (see `maclab list`)");
        // keys that do not apply to an identity are dropped when several ids share one config
        if (ids.size() > 1) {
            const auto& defaults = find_identity(id)->defaults;
            for (auto it = c.begin(); it != c.end();) it = defaults.contains(it.key()) ? std::next(it) : c.erase(it);
        }
        effective_config(id, c);
    }
    std::string path = log_path(log_flag);
    std::vector<CheckReport> reports;
    for (const auto& id : ids) {
        nlohmann::json c = user;
        if (ids.size() > 1) {
            const auto& defaults = find_identity(id)->defaults;
            for (auto it = c.begin(); it != c.end();) it = defaults.contains(it.key()) ? std::next(it) : c.erase(it);
        }
        auto report = run_check(id, c);
        append_report(path, report);
        std::cout << report.id << ": " << to_string(report.status) << "  max_defect=" << report.max_defect << "  "
                  << report.runtime_ms << " ms";
        if (!report.digest.empty()) std::cout << "  digest=" << report.digest.substr(0, 16);
        std::cout << '\n';
        for (const auto& d : report.details) std::cout << "    " << d << '\n';
        reports.push_back(std::move(report));
    }
    return exit_code(reports);
}

int cmd_compute(const std::string& kind, const std::string& partition, const std::string& mu, int vars,
                const std::string& q, const std::string& t)
{
    Params p = [&] {
        try {
            return Params::make(parse_scalar(q), parse_scalar(t));
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("--q/--t: ") + e.what());
        }
    }();
    Partition lambda = parse_partition(partition);
    Partition m = parse_partition(mu);
    SymFunc f;
    if (kind == "P") {
        f = macdonald_P(lambda, p, lambda.size());
    } else if (kind == "Q") {
        f = macdonald_Q(lambda, p, lambda.size());
    } else {
        if (!lambda.contains(m)) throw ConfigError("--mu: must be contained in --partition");
        f = skew_P(lambda, m, p, lambda.size());
    }
    std::cout << restrict_to_vars(f, vars).to_string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Exact verification of Macdonald process identities"};
    app.require_subcommand(1);

    app.add_subcommand("list", "List registered identities with citations and defaults");

    auto* check = app.add_subcommand("check", "Run identity checks and append reports to the run log");
    std::vector<std::string> ids;
    std::string config_path, log_flag;
    std::optional<int> degree;
    std::optional<long> seed;
    check->add_option("--id", ids, "Identity id (repeatable, or 'all')")->required();
    check->add_option("--config", config_path, "JSON configuration file");
    check->add_option("--degree", degree, "Truncation degree D");
    check->add_option("--seed", seed, "Random seed");
    check->add_option("--log", log_flag, "Run log path (default $MACLAB_LOG, then maclab-runs.jsonl)");

    auto* compute = app.add_subcommand("compute", "Print P, Q or skew P restricted to finitely many variables");
    std::string kind, partition, mu, q = "1/3", t = "1/5";
    int vars = 1;
    compute->add_option("kind", kind, "P, Q or skewP")->required()->check(CLI::IsMember({"P", "Q", "skewP"}));
    compute->add_option("--partition", partition, "Parts, e.g. 2,1")->required();
    compute->add_option("--mu", mu, "Inner partition for skewP");
    compute->add_option("--vars", vars, "Number of variables")->check(CLI::Range(1, 8));
    compute->add_option("--q", q, "q as num/den");
    compute->add_option("--t", t, "t as num/den");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand("list")) return cmd_list();
        if (app.got_subcommand("check")) return cmd_check(ids, config_path, degree, seed, log_flag);
        return cmd_compute(kind, partition, mu, vars, q, t);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const InvalidArgument& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    }
}
