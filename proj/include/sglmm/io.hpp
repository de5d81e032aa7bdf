#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sglmm/config.hpp"
#include "sglmm/errors.hpp"
#include "sglmm/graph.hpp"
#include "sglmm/models.hpp"
#include "sglmm/sampler.hpp"

// Delimited-text ingestion (datasets, adjacency lists) and output writing
// (samples, summaries, predictions, run reports). All writers are
// deterministic for a fixed seed; the run report additionally carries wall
// times and is the one artifact that is not byte-stable.

namespace sglmm {

// ---------------------------------------------------------------------------
// Delimited input

struct DelimitedTable {
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> cells;

    int rows() const { return static_cast<int>(cells.size()); }

    int column(const std::string& name) const {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return static_cast<int>(j);
        return -1;
    }
};

namespace io_detail {

inline std::vector<std::string> split_row(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream stream(line);
    while (std::getline(stream, item, delim)) out.push_back(config_detail::trimmed(item));
    if (!line.empty() && line.back() == delim) out.push_back("");
    return out;
}

inline double numeric_cell(const DelimitedTable& table, int row, int col) {
    const std::string& raw = table.cells[static_cast<std::size_t>(row)]
                                        [static_cast<std::size_t>(col)];
    try {
        std::size_t pos = 0;
        const double v = std::stod(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument("trailing text");
        return v;
    } catch (const std::exception&) {
        throw NonNumeric(table.path + ": data row " + std::to_string(row + 1) +
                         ", column '" + table.header[static_cast<std::size_t>(col)] +
                         "': cannot parse '" + raw + "'");
    }
}

inline std::string format_value(double v, const char* fmt) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), fmt, v);
    return buffer;
}

}  // namespace io_detail

// Reads a comma- or tab-delimited file with a header row; '#' lines are
// comments and blank lines are skipped. The delimiter is taken from the
// header (tab when present, comma otherwise).
inline DelimitedTable read_delimited(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError({"data file: cannot open " + path});
    DelimitedTable table;
    table.path = path;
    std::string line;
    char delim = ',';
    while (std::getline(in, line)) {
        const std::string body = config_detail::trimmed(line);
        if (body.empty() || body.front() == '#') continue;
        if (table.header.empty()) {
            delim = body.find('\t') != std::string::npos ? '\t' : ',';
            table.header = io_detail::split_row(body, delim);
            continue;
        }
        std::vector<std::string> row = io_detail::split_row(body, delim);
        if (row.size() != table.header.size())
            throw ValidationError({path + ": data row " + std::to_string(table.rows() + 1) +
                                   " has " + std::to_string(row.size()) + " fields, expected " +
                                   std::to_string(table.header.size())});
        table.cells.push_back(std::move(row));
    }
    if (table.header.empty()) throw ValidationError({path + ": no header row"});
    return table;
}

// ---------------------------------------------------------------------------
// Dataset assembly

struct Dataset {
    Vector y;
    Matrix x;                               // intercept column plus covariates
    std::vector<std::string> predictors;    // labels aligned with x columns
    Vector log_offset;                      // empty unless the model has offsets
    std::vector<int> nodes;                 // graph supports: node id per row
    std::vector<std::array<double, 2>> coords;  // mesh supports: location per row
    std::vector<int> groups;                // location-cluster ids (empty if unused)
    std::vector<std::string> group_labels;  // cluster id -> original label
};

inline Dataset load_dataset(const RunConfig& cfg) {
    const DelimitedTable table = read_delimited(cfg.data_path);
    const int n = table.rows();
    if (n == 0) throw ValidationError({cfg.data_path + ": no data rows"});

    std::vector<std::string> needed = {cfg.response};
    for (const auto& c : cfg.covariate_columns) needed.push_back(c);
    if (!cfg.offset_column.empty()) needed.push_back(cfg.offset_column);
    if (!cfg.group_column.empty()) needed.push_back(cfg.group_column);
    if (cfg.support == SupportKind::graph)
        needed.push_back(cfg.node_column);
    else {
        needed.push_back(cfg.coord_x);
        needed.push_back(cfg.coord_y);
    }
    std::string missing;
    for (const auto& name : needed)
        if (table.column(name) < 0) missing += (missing.empty() ? "" : ", ") + name;
    if (!missing.empty())
        throw MissingColumn(cfg.data_path + ": missing columns: " + missing);

    Dataset data;
    data.y = Vector(n);
    const int y_col = table.column(cfg.response);
    for (int r = 0; r < n; ++r) {
        data.y[r] = io_detail::numeric_cell(table, r, y_col);
        if (cfg.model.family == Family::poisson && data.y[r] < 0.0)
            throw NegativeCount(cfg.data_path + ": data row " + std::to_string(r + 1) +
                                ": negative count " + std::to_string(data.y[r]) +
                                " in column '" + cfg.response + "'");
        if (cfg.model.family == Family::binary_probit && data.y[r] != 0.0 &&
            data.y[r] != 1.0)
            throw NonBinary(cfg.data_path + ": data row " + std::to_string(r + 1) +
                            ": response " + std::to_string(data.y[r]) +
                            " in column '" + cfg.response + "' is not 0/1");
    }

    data.x = Matrix::Ones(n, 1 + static_cast<Eigen::Index>(cfg.covariate_columns.size()));
    data.predictors = {"intercept"};
    for (std::size_t j = 0; j < cfg.covariate_columns.size(); ++j) {
        const int col = table.column(cfg.covariate_columns[j]);
        for (int r = 0; r < n; ++r)
            data.x(r, static_cast<Eigen::Index>(j) + 1) = io_detail::numeric_cell(table, r, col);
        data.predictors.push_back(cfg.covariate_columns[j]);
    }

    if (!cfg.offset_column.empty()) {
        data.log_offset = Vector(n);
        const int col = table.column(cfg.offset_column);
        for (int r = 0; r < n; ++r) {
            const double o = io_detail::numeric_cell(table, r, col);
            if (!(o > 0.0))
                throw ValidationError({cfg.data_path + ": data row " + std::to_string(r + 1) +
                                       ": offset must be positive, got " + std::to_string(o)});
            data.log_offset[r] = std::log(o);
        }
    }

    if (cfg.support == SupportKind::graph) {
        const int col = table.column(cfg.node_column);
        data.nodes.reserve(static_cast<std::size_t>(n));
        for (int r = 0; r < n; ++r) {
            const double v = io_detail::numeric_cell(table, r, col);
            const int node = static_cast<int>(v);
            if (static_cast<double>(node) != v || node < 0)
                throw ValidationError({cfg.data_path + ": data row " + std::to_string(r + 1) +
                                       ": node id must be a non-negative integer, got " +
                                       std::to_string(v)});
            data.nodes.push_back(node);
        }
    } else {
        const int cx = table.column(cfg.coord_x), cy = table.column(cfg.coord_y);
        data.coords.reserve(static_cast<std::size_t>(n));
        for (int r = 0; r < n; ++r)
            data.coords.push_back({io_detail::numeric_cell(table, r, cx),
                                   io_detail::numeric_cell(table, r, cy)});
    }

    if (!cfg.group_column.empty()) {
        const int col = table.column(cfg.group_column);
        data.groups.reserve(static_cast<std::size_t>(n));
        for (int r = 0; r < n; ++r) {
            const std::string& label =
                table.cells[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)];
            int id = -1;
            for (std::size_t g = 0; g < data.group_labels.size(); ++g)
                if (data.group_labels[g] == label) id = static_cast<int>(g);
            if (id < 0) {
                id = static_cast<int>(data.group_labels.size());
                data.group_labels.push_back(label);
            }
            data.groups.push_back(id);
        }
    }
    return data;
}

// ---------------------------------------------------------------------------
// Graph adjacency

// Edge-list reader: one "i j" pair per line, 0-based, '#' comments. The node
// count is the largest index seen plus one, or min_nodes if larger (isolated
// trailing nodes carry no edges).
inline GraphSupport read_adjacency(const std::string& path, int min_nodes = 0) {
    std::ifstream in(path);
    if (!in) throw ValidationError({"adjacency file: cannot open " + path});
    std::vector<std::pair<int, int>> edges;
    int max_index = -1;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string body = config_detail::trimmed(line);
        if (body.empty() || body.front() == '#') continue;
        std::istringstream row(body);
        int a = 0, b = 0;
        std::string extra;
        if (!(row >> a >> b) || (row >> extra))
            throw ValidationError({path + ": line " + std::to_string(number) +
                                   ": expected two node indices, got '" + body + "'"});
        if (a < 0 || b < 0)
            throw ValidationError({path + ": line " + std::to_string(number) +
                                   ": negative node index"});
        edges.emplace_back(a, b);
        max_index = std::max({max_index, a, b});
    }
    const int n = std::max(max_index + 1, min_nodes);
    if (n < 1) throw ValidationError({path + ": no edges and no node-count hint"});
    return GraphSupport::from_edges(n, std::move(edges));
}

// ---------------------------------------------------------------------------
// Output writing

namespace io_detail {

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("output: cannot write " + path);
    return out;
}

}  // namespace io_detail

// Generic delimited writer: '#' comment lines, a header row, then one row
// per state formatted with `fmt`.
inline void write_delimited(const std::string& path, const std::vector<std::string>& comments,
                            const std::vector<std::string>& names,
                            const std::vector<std::vector<double>>& columns,
                            const char* fmt = "%.17g") {
    if (!columns.empty())
        for (const auto& col : columns)
            if (col.size() != columns.front().size())
                throw DimensionMismatch("output: ragged columns writing " + path);
    if (names.size() != columns.size())
        throw DimensionMismatch("output: " + std::to_string(names.size()) + " names for " +
                                std::to_string(columns.size()) + " columns writing " + path);
    std::ofstream out = io_detail::open_output(path);
    for (const auto& c : comments) out << "# " << c << "\n";
    for (std::size_t j = 0; j < names.size(); ++j)
        out << names[j] << (j + 1 == names.size() ? "\n" : ",");
    const std::size_t rows = columns.empty() ? 0 : columns.front().size();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < columns.size(); ++j)
            out << io_detail::format_value(columns[j][r], fmt)
                << (j + 1 == columns.size() ? "\n" : ",");
    if (!out) throw std::runtime_error("output: write failed for " + path);
}

// Samples file: every parameter trace plus the stored log-likelihood trace,
// full precision so a reload reproduces the arrays exactly.
inline void write_samples(const std::string& path, const PosteriorSamples& fit) {
    std::vector<std::string> names = fit.names;
    std::vector<std::vector<double>> columns = fit.draws;
    names.push_back("loglik");
    columns.push_back(fit.loglik);
    write_delimited(path,
                    {"sglmm samples", "seed " + std::to_string(fit.seed),
                     "family " + family_name(fit.spec.family),
                     std::string("prior ") +
                         (fit.spec.prior == PriorKind::grf ? "grf" : "lma")},
                    names, columns, "%.17g");
}

struct SamplesFile {
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;
    std::uint64_t seed = 0;
};

inline SamplesFile read_samples(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError({"samples file: cannot open " + path});
    SamplesFile file;
    std::string line;
    while (std::getline(in, line)) {
        const std::string body = config_detail::trimmed(line);
        if (body.empty()) continue;
        if (body.front() == '#') {
            std::istringstream comment(body.substr(1));
            std::string word;
            if (comment >> word && word == "seed") comment >> file.seed;
            continue;
        }
        if (file.names.empty()) {
            file.names = io_detail::split_row(body, ',');
            file.columns.assign(file.names.size(), {});
            continue;
        }
        const std::vector<std::string> row = io_detail::split_row(body, ',');
        if (row.size() != file.names.size())
            throw ValidationError({path + ": row with " + std::to_string(row.size()) +
                                   " fields, expected " + std::to_string(file.names.size())});
        for (std::size_t j = 0; j < row.size(); ++j) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(row[j], &pos);
                if (pos != row[j].size()) throw std::invalid_argument("trailing text");
                file.columns[j].push_back(v);
            } catch (const std::exception&) {
                throw NonNumeric(path + ": cannot parse '" + row[j] + "' in column '" +
                                 file.names[j] + "'");
            }
        }
    }
    if (file.names.empty()) throw ValidationError({path + ": no header row"});
    return file;
}

inline void write_summary(const std::string& path, const std::vector<SummaryRow>& rows,
                          std::uint64_t seed) {
    std::ofstream out = io_detail::open_output(path);
    out << "# sglmm summary\n# seed " << seed << "\n";
    out << "predictor,parameter,estimate,ci_low,ci_high\n";
    for (const auto& row : rows)
        out << row.predictor << ',' << row.parameter << ','
            << io_detail::format_value(row.estimate, "%.9g") << ','
            << io_detail::format_value(row.lower, "%.9g") << ','
            << io_detail::format_value(row.upper, "%.9g") << "\n";
    if (!out) throw std::runtime_error("output: write failed for " + path);
}

}  // namespace sglmm
