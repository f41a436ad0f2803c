#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "ropelab/attention_probe.hpp"
#include "ropelab/pe_core.hpp"
#include "ropelab/pe_theory.hpp"
#include "ropelab/scaling_law.hpp"
#include "ropelab/selfinstruct.hpp"

namespace ropelab::io {

using nlohmann::json;

// 17 significant digits; round-trips every double.
std::string format_double(double value);

void write_decay_csv(std::ostream& out, const DecayCurve& curve);
void write_helix_csv(std::ostream& out, const HelixTrace& trace);
void write_prediction_csv(std::ostream& out, const PowerLawFit& fit, const std::vector<double>& context_lengths);
void write_bucket_csv(std::ostream& out, const BucketedLoss& buckets);

struct ProbeMassRow {
    std::size_t seq_len = 0;
    std::string variant;
    double mass_on_first = 0.0;
};
void write_probe_mass_csv(std::ostream& out, const std::vector<ProbeMassRow>& rows);

// `context_length,loss` with a header line.
std::vector<LossPoint> read_loss_csv(std::istream& in);
// `p,total_flops` with a header line.
std::vector<FlopsRow> read_flops_csv(std::istream& in);
// One real number per line (or comma separated); a non-numeric first line is a header.
std::vector<double> read_number_column(std::istream& in);

json to_json(const PEVariant& variant);
json to_json(const TheoremCheck& check);
json to_json(const LimitBounds& bounds);
json to_json(const GranularityComparison& cmp);
json to_json(const PowerLawFit& fit);
json to_json(const DoublingFactor& factor);
json to_json(const FlopsEstimate& estimate);
json to_json(const ProbeTask& task);
json to_json(const DocumentChunk& chunk);
json to_json(const TrainingInstance& instance);
json to_json(const PackedBatch& batch);
json to_json(const PaddedSequence& padded);

PowerLawFit fit_from_json(const json& j);
DocumentChunk chunk_from_json(const json& j);
TrainingInstance instance_from_json(const json& j);

struct Document {
    std::string doc_id;
    std::string text;
};

// Newline-delimited JSON; blank lines are skipped.
std::vector<json> read_ndjson(std::istream& in);
void write_ndjson(std::ostream& out, const std::vector<json>& records);
std::vector<Document> read_documents(std::istream& in);

} // namespace ropelab::io
