#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdra/analysis.hpp"
#include "mdra/rnn_ae.hpp"
#include "mdra/training.hpp"
#include "mdra/unitary.hpp"
#include "mdra/vb_engine.hpp"

namespace mdra {

using json = nlohmann::json;

// UnitaryParams <-> {"L", "capacity", "fft_style", "cpx",
//                    "rotation_angles": [...], "phase_angles": [...]}
// (plus "rotation_phases" when cpx is set).
json to_json(const UnitaryParams& p);
UnitaryParams unitary_from_json(const json& j);

// ModelParams <-> {"version": 1, "L", "D", "K", "encoder", "decoders"} with
// matrices row-major as flat arrays, complex entries interleaved [re, im].
json to_json(const ModelParams& m);
ModelParams model_from_json(const json& j);

// VBState <-> {"theta_bar", "nu_bar", "lambda_bar", "R" (row-major flat), "N", "K"}.
json to_json(const VBState& s);
VBState vbstate_from_json(const json& j);

json to_json(const TrainConfig& c);
TrainConfig trainconfig_from_json(const json& j);

json to_json(const ClusterReport& r);

struct Checkpoint {
    TrainedModel trained;
    TrainConfig config;
};

// Single JSON document bundling model, VB state, config and trace.
json to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const json& j);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// JSON-lines datasets: {"id": n, "label": "...", "values": [[...], ...]} per
// line; "label" omitted for unlabeled signals.
void write_dataset_jsonl(std::ostream& os, const Dataset& ds);
Dataset read_dataset_jsonl(std::istream& is);
void save_dataset_jsonl(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset_jsonl(const std::filesystem::path& path);

// Progress log: iter, weighted_loss, free_energy, masses (desc. "k:mass" list).
void write_trace_tsv(std::ostream& os, const std::vector<TraceRow>& trace);
// Free-energy trace of a VB run: iteration, free_energy.
void write_free_energy_tsv(std::ostream& os, const std::vector<double>& fbar);
// cluster, mass per line.
void write_masses_tsv(std::ostream& os, const std::vector<double>& masses);
// id, coordinates..., assignment and label when present.
void write_embedding_tsv(std::ostream& os, const Dataset& ds, const Mat& coords,
                         const std::vector<std::size_t>* assignments);
// id, x, y, z, r, g, b with RGB from per-axis min-max scaling (3-D input).
void write_rgb_embedding_tsv(std::ostream& os, const Dataset& ds, const Mat& coords);

// CSV time-series reader for ingestion: first row is a header, first column a
// timestamp (ignored), remaining columns are signal channels.
Mat read_csv_signal(std::istream& is);
Mat load_csv_signal(const std::filesystem::path& path);

}  // namespace mdra
