#pragma once

// CSV and JSON file formats. Events travel as long-format CSV
// (id,time,kind,value), baseline variables as a wide CSV keyed by id.
// Numeric output uses round-trip precision so golden files are stable.

#include <string>
#include <vector>

#include "ctmsm/aalen.hpp"
#include "ctmsm/design.hpp"
#include "ctmsm/event_history.hpp"
#include "ctmsm/transform.hpp"
#include "ctmsm/weight_set.hpp"
#include "ctmsm/weights.hpp"

namespace ctmsm {

// user-facing input problems (bad config, missing file); CLI exit code 1
struct UserError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string format_double(double v);  // shortest round-trip decimal

EventHistory read_history_csv(const std::string& events_path, const std::string& baseline_path,
                              double horizon);
void write_events_csv(const std::string& path, const EventHistory& history);
void write_baseline_csv(const std::string& path, const EventHistory& history);

void write_cumcoef_csv(const std::string& path, const CumCoef& fit);
void write_cumcoef_meta_json(const std::string& path, const CumCoef& fit);
CumCoef read_cumcoef_csv(const std::string& path);

void write_weights_csv(const std::string& path, const WeightSet& ws);
WeightSet read_weights_csv(const std::string& path, int n);

void write_parampath_csv(const std::string& path, const ParamPath& path_data);
void write_expanded_csv(const std::string& path, const ExpandedTable& table);

void write_diagnostics_json(const std::string& path, const WeightDiagnostics& d,
                            const char* provenance);

// flat table writer for experiment outputs
void write_table_csv(const std::string& path, const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& rows);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// FNV-1a, used for config hashes in experiment manifests
std::string content_hash(const std::string& content);

}  // namespace ctmsm
