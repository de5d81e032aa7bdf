#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sglmm/errors.hpp"
#include "sglmm/evaluation.hpp"
#include "sglmm/models.hpp"
#include "sglmm/sampler.hpp"

// Run configuration: a flat key = value file with [section] headers. Parsing
// is total — every malformed entry is collected and reported together, never
// just the first one.

namespace sglmm {

enum class Command { fit, cv, simulate };

enum class SupportKind { graph, mesh };

struct RunConfig {
    Command command = Command::fit;
    std::string output_dir;

    // data file and column roles
    std::string data_path;
    std::string response;
    std::vector<std::string> covariate_columns;  // intercept is implicit
    std::string offset_column;                   // optional, Poisson exposures
    std::string group_column;                    // optional, location clusters
    std::string node_column = "node";            // discrete supports
    std::string coord_x = "x";                   // continuous supports
    std::string coord_y = "y";

    // spatial support
    SupportKind support = SupportKind::graph;
    std::string adjacency_path;  // graph: edge list
    std::string mesh_path;       // mesh: nodes + triangles
    int order = 1;               // graph difference order k
    int alpha = 2;               // mesh operator order

    ModelSpec model;
    McmcConfig mcmc;
    int chains = 1;

    int cv_k = 10;
    Grouping cv_grouping = Grouping::none;
};

namespace config_detail {

inline std::string trimmed(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

struct Entry {
    std::string section;
    std::string key;
    std::string value;
    int line = 0;
    bool used = false;
};

// Raw pass: sections, keys, values, and syntax problems with line numbers.
struct RawConfig {
    std::vector<Entry> entries;
    std::vector<std::string> errors;

    Entry* find(const std::string& section, const std::string& key) {
        for (auto& e : entries)
            if (e.section == section && e.key == key) return &e;
        return nullptr;
    }
};

inline RawConfig parse_raw(const std::string& text) {
    RawConfig raw;
    std::istringstream stream(text);
    std::string line;
    std::string section;
    int number = 0;
    while (std::getline(stream, line)) {
        ++number;
        const std::string body = trimmed(line);
        if (body.empty() || body.front() == '#') continue;
        if (body.front() == '[') {
            if (body.back() != ']' || body.size() < 3) {
                raw.errors.push_back("line " + std::to_string(number) +
                                     ": malformed section header '" + body + "'");
                continue;
            }
            section = trimmed(body.substr(1, body.size() - 2));
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            raw.errors.push_back("line " + std::to_string(number) +
                                 ": expected key = value, got '" + body + "'");
            continue;
        }
        Entry e;
        e.section = section;
        e.key = trimmed(body.substr(0, eq));
        e.value = trimmed(body.substr(eq + 1));
        e.line = number;
        if (e.key.empty()) {
            raw.errors.push_back("line " + std::to_string(number) + ": empty key");
            continue;
        }
        if (section.empty()) {
            raw.errors.push_back("line " + std::to_string(number) + ": key '" + e.key +
                                 "' appears before any [section] header");
            continue;
        }
        if (raw.find(e.section, e.key)) {
            raw.errors.push_back("line " + std::to_string(number) + ": duplicate key '" +
                                 e.key + "' in section [" + e.section + "]");
            continue;
        }
        raw.entries.push_back(std::move(e));
    }
    return raw;
}

// Typed extraction over the raw entries; every failure lands in `errors`
// with line and key context, and a safe fallback keeps the pass going.
class Reader {
  public:
    Reader(RawConfig& raw, std::vector<std::string>& errors) : raw_(raw), errors_(errors) {}

    bool has(const std::string& section, const std::string& key) {
        return raw_.find(section, key) != nullptr;
    }

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) {
        Entry* e = raw_.find(section, key);
        if (!e) return fallback;
        e->used = true;
        return e->value;
    }

    long long get_int(const std::string& section, const std::string& key, long long fallback) {
        Entry* e = raw_.find(section, key);
        if (!e) return fallback;
        e->used = true;
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(e->value, &pos);
            if (pos != e->value.size()) throw std::invalid_argument("trailing text");
            return v;
        } catch (const std::exception&) {
            fail(*e, "expected an integer, got '" + e->value + "'");
            return fallback;
        }
    }

    double get_double(const std::string& section, const std::string& key, double fallback) {
        Entry* e = raw_.find(section, key);
        if (!e) return fallback;
        e->used = true;
        try {
            std::size_t pos = 0;
            const double v = std::stod(e->value, &pos);
            if (pos != e->value.size()) throw std::invalid_argument("trailing text");
            return v;
        } catch (const std::exception&) {
            fail(*e, "expected a number, got '" + e->value + "'");
            return fallback;
        }
    }

    std::optional<double> get_optional_double(const std::string& section,
                                              const std::string& key) {
        if (!has(section, key)) return std::nullopt;
        return get_double(section, key, 1.0);
    }

    bool get_bool(const std::string& section, const std::string& key, bool fallback) {
        Entry* e = raw_.find(section, key);
        if (!e) return fallback;
        e->used = true;
        if (e->value == "true" || e->value == "on" || e->value == "1") return true;
        if (e->value == "false" || e->value == "off" || e->value == "0") return false;
        fail(*e, "expected true/false, got '" + e->value + "'");
        return fallback;
    }

    std::vector<std::string> get_list(const std::string& section, const std::string& key) {
        Entry* e = raw_.find(section, key);
        if (!e) return {};
        e->used = true;
        std::vector<std::string> items;
        std::string item;
        std::istringstream stream(e->value);
        while (std::getline(stream, item, ',')) {
            const std::string t = trimmed(item);
            if (!t.empty()) items.push_back(t);
        }
        return items;
    }

    void error(const std::string& section, const std::string& key, const std::string& msg) {
        Entry* e = raw_.find(section, key);
        if (e)
            fail(*e, msg);
        else
            errors_.push_back("[" + section + "] " + key + ": " + msg);
    }

    void flag_unused() {
        for (const Entry& e : raw_.entries)
            if (!e.used)
                errors_.push_back("line " + std::to_string(e.line) + ": unknown key '" +
                                  e.key + "' in section [" + e.section + "]");
    }

  private:
    void fail(const Entry& e, const std::string& msg) {
        errors_.push_back("line " + std::to_string(e.line) + ": [" + e.section + "] " +
                          e.key + ": " + msg);
    }

    RawConfig& raw_;
    std::vector<std::string>& errors_;
};

inline std::string resolve_path(const std::string& base_dir, const std::string& path) {
    if (path.empty()) return path;
    const std::filesystem::path p(path);
    if (p.is_absolute() || base_dir.empty()) return path;
    return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

inline void require_readable(const std::string& path, const std::string& what,
                             std::vector<std::string>& errors) {
    if (path.empty()) return;
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec))
        errors.push_back(what + ": file not found: " + path);
}

}  // namespace config_detail

// Parses configuration text. Relative paths resolve against base_dir (the
// directory holding the config file). Throws ValidationError carrying every
// problem found.
inline RunConfig parse_config_text(const std::string& text, const std::string& base_dir) {
    using config_detail::Reader;
    config_detail::RawConfig raw = config_detail::parse_raw(text);
    std::vector<std::string> errors = raw.errors;
    Reader reader(raw, errors);
    RunConfig cfg;

    // [run]
    const std::string command = reader.get_string("run", "command", "");
    if (command == "fit")
        cfg.command = Command::fit;
    else if (command == "cv")
        cfg.command = Command::cv;
    else if (command == "simulate")
        cfg.command = Command::simulate;
    else if (command.empty())
        errors.push_back("[run] command: required (fit, cv, or simulate)");
    else
        reader.error("run", "command", "unknown command '" + command + "'");
    cfg.output_dir = config_detail::resolve_path(base_dir,
                                                 reader.get_string("run", "output_dir", ""));
    if (cfg.output_dir.empty()) errors.push_back("[run] output_dir: required");

    // [data]
    cfg.data_path = config_detail::resolve_path(base_dir,
                                                reader.get_string("data", "path", ""));
    cfg.response = reader.get_string("data", "response", "");
    cfg.covariate_columns = reader.get_list("data", "covariates");
    cfg.offset_column = reader.get_string("data", "offset", "");
    cfg.group_column = reader.get_string("data", "group", "");
    cfg.node_column = reader.get_string("data", "node", "node");
    cfg.coord_x = reader.get_string("data", "coord_x", "x");
    cfg.coord_y = reader.get_string("data", "coord_y", "y");

    const bool needs_data = cfg.command != Command::simulate;
    if (needs_data) {
        if (cfg.data_path.empty())
            errors.push_back("[data] path: required for fit and cv runs");
        else
            config_detail::require_readable(cfg.data_path, "[data] path", errors);
        if (cfg.response.empty())
            errors.push_back("[data] response: required for fit and cv runs");
    }

    // [support]
    const std::string kind = reader.get_string("support", "kind", "");
    if (kind == "graph")
        cfg.support = SupportKind::graph;
    else if (kind == "mesh")
        cfg.support = SupportKind::mesh;
    else if (kind.empty())
        errors.push_back("[support] kind: required (graph or mesh)");
    else
        reader.error("support", "kind", "unknown support kind '" + kind + "'");
    cfg.adjacency_path = config_detail::resolve_path(
        base_dir, reader.get_string("support", "adjacency", ""));
    cfg.mesh_path = config_detail::resolve_path(base_dir,
                                                reader.get_string("support", "mesh", ""));
    cfg.order = static_cast<int>(reader.get_int("support", "order", 1));
    cfg.alpha = static_cast<int>(reader.get_int("support", "alpha", 2));
    if (kind == "graph") {
        if (cfg.adjacency_path.empty())
            errors.push_back("[support] adjacency: required for graph supports");
        else
            config_detail::require_readable(cfg.adjacency_path, "[support] adjacency", errors);
        if (cfg.order < 0) reader.error("support", "order", "difference order k must be non-negative");
    }
    if (kind == "mesh") {
        if (cfg.mesh_path.empty())
            errors.push_back("[support] mesh: required for mesh supports");
        else
            config_detail::require_readable(cfg.mesh_path, "[support] mesh", errors);
        if (cfg.alpha < 2) reader.error("support", "alpha", "operator order must be at least 2");
    }

    // [model]
    const std::string family = reader.get_string("model", "family", "");
    if (family == "gaussian")
        cfg.model.family = Family::gaussian;
    else if (family == "binary_probit")
        cfg.model.family = Family::binary_probit;
    else if (family == "poisson")
        cfg.model.family = Family::poisson;
    else if (family.empty())
        errors.push_back("[model] family: required (gaussian, binary_probit, or poisson)");
    else
        reader.error("model", "family", "unknown family '" + family + "'");

    const std::string prior = reader.get_string("model", "prior", "");
    if (prior == "grf")
        cfg.model.prior = PriorKind::grf;
    else if (prior == "lma")
        cfg.model.prior = PriorKind::lma;
    else if (prior.empty())
        errors.push_back("[model] prior: required (grf or lma)");
    else
        reader.error("model", "prior", "unknown prior '" + prior + "'");

    if (kind == "mesh" && prior == "lma" && cfg.alpha % 2 != 0)
        reader.error("support", "alpha",
                     "the Laplace moving-average construction on a mesh needs an even "
                     "operator order; alpha = " +
                         std::to_string(cfg.alpha) + " is only available for the GRF prior");

    cfg.model.covariates = 1 + static_cast<int>(cfg.covariate_columns.size());
    cfg.model.has_offset = !cfg.offset_column.empty();
    cfg.model.include_nugget = reader.get_bool("model", "nugget", false);
    cfg.model.beta_variance = reader.get_double("model", "beta_variance", 1000.0);
    if (!(cfg.model.beta_variance > 0.0))
        reader.error("model", "beta_variance", "must be positive");

    if (cfg.model.has_offset && family != "poisson" && !family.empty())
        errors.push_back("[data] offset: exposure offsets apply to the poisson family only");
    if (cfg.model.include_nugget && family != "poisson" && !family.empty())
        reader.error("model", "nugget",
                     "the per-observation nugget applies to the poisson family only");

    cfg.model.scale_prior.scale = reader.get_double("model", "scale_prior_scale", 10.0);
    cfg.model.scale_prior.on_sd = reader.get_bool("model", "scale_prior_on_sd", false);
    cfg.model.kappa2_prior.scale = reader.get_double("model", "kappa2_prior_scale", 1.0);
    cfg.model.kappa2_prior.on_sd = reader.get_bool("model", "kappa2_prior_on_sd", false);
    cfg.model.tau_prior.scale = reader.get_double("model", "tau_prior_scale", 1.0);
    if (!(cfg.model.scale_prior.scale > 0.0))
        reader.error("model", "scale_prior_scale", "must be positive");
    if (!(cfg.model.kappa2_prior.scale > 0.0))
        reader.error("model", "kappa2_prior_scale", "must be positive");
    if (!(cfg.model.tau_prior.scale > 0.0))
        reader.error("model", "tau_prior_scale", "must be positive");

    const std::string sigma2 = reader.get_string("model", "sigma2_prior", "half_normal");
    if (sigma2 == "half_normal")
        cfg.model.sigma2_prior = SigmaPriorKind::half_normal;
    else if (sigma2 == "inverse_gamma")
        cfg.model.sigma2_prior = SigmaPriorKind::inverse_gamma;
    else
        reader.error("model", "sigma2_prior",
                     "expected half_normal or inverse_gamma, got '" + sigma2 + "'");
    cfg.model.sigma2_half_normal.scale = reader.get_double("model", "sigma2_scale", 1.0);
    cfg.model.sigma2_half_normal.on_sd = reader.get_bool("model", "sigma2_on_sd", true);
    cfg.model.sigma2_inverse_gamma.shape = reader.get_double("model", "sigma2_ig_shape", 1.0);
    cfg.model.sigma2_inverse_gamma.scale = reader.get_double("model", "sigma2_ig_scale", 1.0);
    if (!(cfg.model.sigma2_half_normal.scale > 0.0))
        reader.error("model", "sigma2_scale", "must be positive");
    if (!(cfg.model.sigma2_inverse_gamma.shape > 0.0))
        reader.error("model", "sigma2_ig_shape", "must be positive");
    if (!(cfg.model.sigma2_inverse_gamma.scale > 0.0))
        reader.error("model", "sigma2_ig_scale", "must be positive");

    const std::string gamma_update = reader.get_string("model", "gamma_update", "mh");
    if (gamma_update == "gibbs")
        cfg.model.gamma_update_gibbs = true;
    else if (gamma_update == "mh")
        cfg.model.gamma_update_gibbs = false;
    else
        reader.error("model", "gamma_update", "expected mh or gibbs, got '" + gamma_update + "'");

    const std::string joint = reader.get_string("model", "joint_hyper_proposals", "auto");
    if (joint == "on")
        cfg.model.joint_hyper_proposals = true;
    else if (joint == "off")
        cfg.model.joint_hyper_proposals = false;
    else if (joint != "auto")
        reader.error("model", "joint_hyper_proposals",
                     "expected auto, on, or off, got '" + joint + "'");

    cfg.model.fixed_scale = reader.get_optional_double("model", "fixed_scale");
    cfg.model.fixed_kappa2 = reader.get_optional_double("model", "fixed_kappa2");
    cfg.model.fixed_sigma2 = reader.get_optional_double("model", "fixed_sigma2");
    cfg.model.fixed_tau = reader.get_optional_double("model", "fixed_tau");
    const std::pair<const char*, std::optional<double>> pinned[] = {
        {"fixed_scale", cfg.model.fixed_scale},
        {"fixed_kappa2", cfg.model.fixed_kappa2},
        {"fixed_sigma2", cfg.model.fixed_sigma2},
        {"fixed_tau", cfg.model.fixed_tau}};
    for (const auto& [key, value] : pinned)
        if (value && !(*value > 0.0)) reader.error("model", key, "must be positive");

    if (cfg.command == Command::simulate) {
        if (!cfg.model.fixed_scale)
            errors.push_back("[model] fixed_scale: required for simulate runs");
        if (!cfg.model.fixed_kappa2)
            errors.push_back("[model] fixed_kappa2: required for simulate runs");
        if (kind == "mesh" && prior == "lma" && !cfg.model.fixed_tau)
            errors.push_back("[model] fixed_tau: required to simulate the mesh Laplace prior");
    }

    // [mcmc]
    cfg.mcmc.burn_in = reader.get_int("mcmc", "burn_in", 10000);
    cfg.mcmc.n_store = reader.get_int("mcmc", "n_store", 50000);
    cfg.mcmc.thin = static_cast<int>(reader.get_int("mcmc", "thin", 1));
    cfg.mcmc.seed = static_cast<std::uint64_t>(reader.get_int("mcmc", "seed", 1));
    cfg.chains = static_cast<int>(reader.get_int("mcmc", "chains", 1));
    if (cfg.mcmc.burn_in < 0) reader.error("mcmc", "burn_in", "must be non-negative");
    if (cfg.mcmc.n_store < 1) reader.error("mcmc", "n_store", "must be at least 1");
    if (cfg.mcmc.thin < 1) reader.error("mcmc", "thin", "must be at least 1");
    if (cfg.chains < 1) reader.error("mcmc", "chains", "must be at least 1");

    // [cv]
    cfg.cv_k = static_cast<int>(reader.get_int("cv", "k", 10));
    const std::string grouping = reader.get_string("cv", "grouping", "none");
    if (grouping == "none")
        cfg.cv_grouping = Grouping::none;
    else if (grouping == "by_location_cluster")
        cfg.cv_grouping = Grouping::by_location_cluster;
    else
        reader.error("cv", "grouping",
                     "expected none or by_location_cluster, got '" + grouping + "'");
    if (cfg.command == Command::cv && cfg.cv_k < 2)
        reader.error("cv", "k", "cross-validation needs at least 2 folds");
    if (cfg.cv_grouping == Grouping::by_location_cluster && cfg.group_column.empty())
        errors.push_back("[cv] grouping: by_location_cluster needs a [data] group column");

    reader.flag_unused();
    if (!errors.empty()) throw ValidationError(std::move(errors));

    std::error_code ec;
    std::filesystem::create_directories(cfg.output_dir, ec);
    if (ec || !std::filesystem::is_directory(cfg.output_dir))
        throw ValidationError({"[run] output_dir: cannot create directory " + cfg.output_dir});
    return cfg;
}

inline RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError({"config: cannot read " + path});
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(),
                             std::filesystem::path(path).parent_path().string());
}

}  // namespace sglmm
