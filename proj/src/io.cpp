#include "ctmsm/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace ctmsm {

using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    // %.17g round-trips; try shorter representations first
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    fields.push_back(field);
    return fields;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UserError("cannot open file: " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        rows.push_back(split_csv_line(line));
    }
    if (rows.empty()) throw UserError("empty CSV file: " + path);
    return rows;
}

double parse_double(const std::string& s, const std::string& path) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) throw UserError("bad number '" + s + "' in " + path);
    return v;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw UserError("cannot write file: " + path);
    return out;
}

}  // namespace

EventHistory read_history_csv(const std::string& events_path, const std::string& baseline_path,
                              double horizon) {
    std::vector<std::vector<double>> baseline;
    std::vector<std::string> baseline_names;
    std::map<long, int> id_map;  // external id -> dense subject index, ordered

    if (!baseline_path.empty()) {
        auto rows = read_csv(baseline_path);
        if (rows[0].empty() || rows[0][0] != "id")
            throw UserError("baseline CSV must start with an 'id' column: " + baseline_path);
        baseline_names.assign(rows[0].begin() + 1, rows[0].end());
        std::map<long, std::vector<double>> by_id;
        for (std::size_t r = 1; r < rows.size(); ++r) {
            long id = std::lround(parse_double(rows[r][0], baseline_path));
            std::vector<double> vals;
            for (std::size_t c = 1; c < rows[r].size(); ++c)
                vals.push_back(parse_double(rows[r][c], baseline_path));
            if (vals.size() != baseline_names.size())
                throw UserError("baseline row arity mismatch in " + baseline_path);
            if (!by_id.emplace(id, std::move(vals)).second)
                throw UserError("duplicate baseline id in " + baseline_path);
        }
        for (auto& [id, vals] : by_id) {
            id_map.emplace(id, static_cast<int>(baseline.size()));
            baseline.push_back(std::move(vals));
        }
    }

    auto rows = read_csv(events_path);
    std::size_t first = 0;
    if (!rows[0].empty() && rows[0][0] == "id") first = 1;  // optional header

    std::vector<EventRecord> records;
    if (baseline_path.empty()) {
        // dense ids ordered by numeric value
        for (std::size_t r = first; r < rows.size(); ++r)
            id_map.emplace(std::lround(parse_double(rows[r][0], events_path)), 0);
        int next = 0;
        for (auto& [id, idx] : id_map) idx = next++;
        baseline.assign(id_map.size(), {});
    }
    for (std::size_t r = first; r < rows.size(); ++r) {
        const auto& f = rows[r];
        if (f.size() < 3) throw UserError("events CSV needs id,time,kind columns: " + events_path);
        long id = std::lround(parse_double(f[0], events_path));
        auto it = id_map.find(id);
        if (it == id_map.end())
            throw UserError("event id " + std::to_string(id) + " missing from baseline CSV");
        EventRecord rec;
        rec.subject = it->second;
        rec.time = parse_double(f[1], events_path);
        if (f[2].size() != 1) throw UserError("bad kind '" + f[2] + "' in " + events_path);
        rec.kind = kind_from_code(f[2][0]);
        if (f.size() > 3 && !f[3].empty()) rec.payload.push_back(parse_double(f[3], events_path));
        records.push_back(std::move(rec));
    }
    return build_history(std::move(records), std::move(baseline), std::move(baseline_names),
                         horizon);
}

void write_events_csv(const std::string& path, const EventHistory& history) {
    auto out = open_out(path);
    out << "id,time,kind,value\n";
    for (const auto& r : history.records()) {
        out << r.subject << ',' << format_double(r.time) << ',' << kind_code(r.kind) << ',';
        if (!r.payload.empty()) out << format_double(r.payload[0]);
        out << '\n';
    }
}

void write_baseline_csv(const std::string& path, const EventHistory& history) {
    auto out = open_out(path);
    out << "id";
    for (const auto& name : history.baseline_names()) out << ',' << name;
    out << '\n';
    for (int i = 0; i < history.n(); ++i) {
        out << i;
        for (int j = 0; j < history.baseline_dim(); ++j)
            out << ',' << format_double(history.baseline_value(i, j));
        out << '\n';
    }
}

void write_cumcoef_csv(const std::string& path, const CumCoef& fit) {
    auto out = open_out(path);
    out << "time";
    for (const auto& c : fit.columns) out << ",increment_" << c;
    for (const auto& c : fit.columns) out << ",cumulative_" << c;
    out << '\n';
    for (std::size_t k = 0; k < fit.times.size(); ++k) {
        out << format_double(fit.times[k]);
        for (int j = 0; j < fit.p(); ++j)
            out << ',' << format_double(fit.increments(static_cast<Eigen::Index>(k), j));
        for (int j = 0; j < fit.p(); ++j)
            out << ',' << format_double(fit.cumulative(static_cast<Eigen::Index>(k), j));
        out << '\n';
    }
}

void write_cumcoef_meta_json(const std::string& path, const CumCoef& fit) {
    json meta;
    meta["columns"] = fit.columns;
    meta["skipped_times"] = fit.skipped_times;
    meta["event_times"] = fit.times.size();
    write_text_file(path, meta.dump(2) + "\n");
}

CumCoef read_cumcoef_csv(const std::string& path) {
    auto rows = read_csv(path);
    const auto& header = rows[0];
    if (header.empty() || header[0] != "time")
        throw UserError("cumulative coefficient CSV must start with 'time': " + path);
    std::vector<std::string> columns;
    for (std::size_t c = 1; c < header.size(); ++c) {
        const std::string prefix = "increment_";
        if (header[c].rfind(prefix, 0) == 0) columns.push_back(header[c].substr(prefix.size()));
    }
    if (columns.empty()) throw UserError("no increment columns in " + path);
    if (header.size() != 1 + 2 * columns.size())
        throw UserError("malformed cumulative coefficient CSV: " + path);

    CumCoef fit;
    fit.columns = columns;
    const auto T = static_cast<Eigen::Index>(rows.size() - 1);
    const int p = static_cast<int>(columns.size());
    fit.increments.resize(T, p);
    fit.cumulative.resize(T, p);
    for (Eigen::Index r = 0; r < T; ++r) {
        const auto& f = rows[static_cast<std::size_t>(r) + 1];
        fit.times.push_back(parse_double(f[0], path));
        for (int j = 0; j < p; ++j) {
            fit.increments(r, j) = parse_double(f[1 + static_cast<std::size_t>(j)], path);
            fit.cumulative(r, j) =
                parse_double(f[1 + columns.size() + static_cast<std::size_t>(j)], path);
        }
    }
    return fit;
}

void write_weights_csv(const std::string& path, const WeightSet& ws) {
    auto out = open_out(path);
    out << "id,time,value\n";
    for (int i = 0; i < ws.n(); ++i) {
        const auto& p = ws.paths[static_cast<std::size_t>(i)];
        out << i << ",0," << format_double(p.initial_value()) << '\n';
        for (std::size_t k = 0; k < p.jump_count(); ++k)
            out << i << ',' << format_double(p.times()[k]) << ',' << format_double(p.values()[k])
                << '\n';
    }
}

WeightSet read_weights_csv(const std::string& path, int n) {
    auto rows = read_csv(path);
    std::size_t first = rows[0][0] == "id" ? 1 : 0;
    WeightSet ws;
    ws.paths.assign(static_cast<std::size_t>(n), StepPath(1.0));
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (std::size_t r = first; r < rows.size(); ++r) {
        const auto& f = rows[r];
        if (f.size() != 3) throw UserError("weights CSV needs id,time,value: " + path);
        int id = static_cast<int>(std::lround(parse_double(f[0], path)));
        if (id < 0 || id >= n) throw UserError("weight subject out of range in " + path);
        double t = parse_double(f[1], path);
        double v = parse_double(f[2], path);
        auto& sp = ws.paths[static_cast<std::size_t>(id)];
        if (t == 0.0 && !seen[static_cast<std::size_t>(id)]) {
            sp = StepPath(v);
        } else {
            sp.append(t, v);
        }
        seen[static_cast<std::size_t>(id)] = true;
    }
    return ws;
}

void write_parampath_csv(const std::string& path, const ParamPath& path_data) {
    auto out = open_out(path);
    out << "time";
    for (std::size_t j = 0; j < path_data.eta0.size(); ++j) {
        out << ',';
        if (j < path_data.state_names.size()) out << path_data.state_names[j];
        else out << "state_" << (j + 1);
    }
    out << '\n';
    out << "0";
    for (double v : path_data.eta0) out << ',' << format_double(v);
    out << '\n';
    for (std::size_t k = 0; k < path_data.times.size(); ++k) {
        out << format_double(path_data.times[k]);
        for (double v : path_data.states[k]) out << ',' << format_double(v);
        out << '\n';
    }
}

void write_expanded_csv(const std::string& path, const ExpandedTable& table) {
    auto out = open_out(path);
    out << "id,time,event";
    for (const auto& lbl : table.design_labels) out << ",x_" << lbl;
    out << ",weight\n";
    for (std::size_t r = 0; r < table.rows(); ++r) {
        out << table.subjects[r] << ',' << format_double(table.times[r]) << ',' << table.event[r];
        for (double v : table.design[r]) out << ',' << format_double(v);
        out << ',' << format_double(table.weight[r]) << '\n';
    }
}

void write_diagnostics_json(const std::string& path, const WeightDiagnostics& d,
                            const char* provenance) {
    json j;
    j["provenance"] = provenance;
    j["flagged_subjects"] = d.flagged;
    j["truncation_count"] = d.truncation_count;
    j["mean_weight_curve"]["time"] = d.grid;
    j["mean_weight_curve"]["mean"] = d.mean_curve;
    write_text_file(path, j.dump(2) + "\n");
}

void write_table_csv(const std::string& path, const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& rows) {
    auto out = open_out(path);
    for (std::size_t c = 0; c < header.size(); ++c)
        out << (c ? "," : "") << header[c];
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c)
            out << (c ? "," : "") << format_double(row[c]);
        out << '\n';
    }
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UserError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    auto out = open_out(path);
    out << content;
}

std::string content_hash(const std::string& content) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : content) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace ctmsm
