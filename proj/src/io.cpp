#include "ropelab/io.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "ropelab/error.hpp"

namespace ropelab::io {

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

void write_decay_csv(std::ostream& out, const DecayCurve& curve) {
    out << "delta,score\n";
    for (std::size_t i = 0; i < curve.distances.size(); ++i) {
        out << curve.distances[i] << ',' << format_double(curve.scores[i]) << '\n';
    }
}

void write_helix_csv(std::ostream& out, const HelixTrace& trace) {
    out << "t,x,y,z\n";
    for (const auto& s : trace.samples) {
        out << format_double(s.t) << ',' << format_double(s.x) << ',' << format_double(s.y) << ','
            << format_double(s.z) << '\n';
    }
}

void write_prediction_csv(std::ostream& out, const PowerLawFit& fit, const std::vector<double>& context_lengths) {
    out << "context_length,predicted_loss\n";
    for (double c : context_lengths) {
        out << format_double(c) << ',' << format_double(predict_loss(fit, c)) << '\n';
    }
}

void write_bucket_csv(std::ostream& out, const BucketedLoss& buckets) {
    out << "bucket_index,mean_loss\n";
    for (std::size_t i = 0; i < buckets.bucket_means.size(); ++i) {
        out << i << ',' << format_double(buckets.bucket_means[i]) << '\n';
    }
}

void write_probe_mass_csv(std::ostream& out, const std::vector<ProbeMassRow>& rows) {
    out << "seq_len,variant,mass_on_first\n";
    for (const auto& r : rows) {
        out << r.seq_len << ',' << r.variant << ',' << format_double(r.mass_on_first) << '\n';
    }
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        fields.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
    }
    return fields;
}

bool parse_number(const std::string& s, double& value) {
    if (s.empty()) {
        return false;
    }
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, value);
    return ec == std::errc{} && ptr == end;
}

// Rows of exactly `width` numeric fields; a non-numeric first row is a header.
std::vector<std::vector<double>> read_numeric_rows(std::istream& in, std::size_t width) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const auto fields = split_fields(line);
        std::vector<double> row(fields.size());
        bool numeric = fields.size() == width;
        for (std::size_t i = 0; numeric && i < fields.size(); ++i) {
            numeric = parse_number(fields[i], row[i]);
        }
        if (!numeric) {
            if (rows.empty() && line_no == 1) {
                continue;
            }
            fail("malformed CSV row " + std::to_string(line_no) + ": '" + line + "'");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

std::vector<LossPoint> read_loss_csv(std::istream& in) {
    std::vector<LossPoint> points;
    for (const auto& row : read_numeric_rows(in, 2)) {
        points.push_back({row[0], row[1]});
    }
    return points;
}

std::vector<FlopsRow> read_flops_csv(std::istream& in) {
    std::vector<FlopsRow> rows;
    for (const auto& row : read_numeric_rows(in, 2)) {
        rows.push_back({row[0], row[1]});
    }
    return rows;
}

std::vector<double> read_number_column(std::istream& in) {
    std::vector<double> values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        for (const auto& field : split_fields(line)) {
            if (field.empty()) {
                continue;
            }
            double v = 0.0;
            if (!parse_number(field, v)) {
                if (line_no == 1 && values.empty()) {
                    break;
                }
                fail("malformed number '" + field + "' on line " + std::to_string(line_no));
            }
            values.push_back(v);
        }
    }
    return values;
}

json to_json(const PEVariant& variant) {
    json j{{"kind", pe_kind_name(variant.kind())},
           {"base_frequency", variant.base_frequency()},
           {"head_dim", variant.head_dim()}};
    if (variant.pi_alpha()) {
        j["pi_alpha"] = *variant.pi_alpha();
    }
    if (variant.abf_beta()) {
        j["abf_beta"] = *variant.abf_beta();
    }
    if (variant.xpos_smoothing()) {
        j["xpos_smoothing"] = *variant.xpos_smoothing();
    }
    if (variant.xpos_scale_base()) {
        j["xpos_scale_base"] = *variant.xpos_scale_base();
    }
    return j;
}

json to_json(const TheoremCheck& c) {
    return json{{"variant", to_json(c.variant)},
                {"n", c.n},
                {"observed_similarity", c.observed_similarity},
                {"lower_bound", c.lower_bound},
                {"upper_bound", c.upper_bound},
                {"c_d", c.c_d},
                {"pair_min", c.pair_min},
                {"pair_max", c.pair_max},
                {"x_norm_sq", c.x_norm_sq},
                {"component_lower_bound", c.component_lower_bound},
                {"component_upper_bound", c.component_upper_bound}};
}

json to_json(const LimitBounds& b) {
    return json{{"lower", b.lower},
                {"upper", b.upper},
                {"approximation", b.approximation},
                {"variant", to_json(b.variant)}};
}

json to_json(const GranularityComparison& cmp) {
    return json{{"pi_granularity", cmp.pi_granularity},
                {"abf_granularity", cmp.abf_granularity},
                {"ratio", cmp.ratio}};
}

json to_json(const PowerLawFit& fit) {
    return json{{"alpha", fit.alpha},
                {"beta", fit.beta},
                {"gamma", fit.gamma},
                {"rmse", fit.rmse},
                {"iterations", fit.iterations},
                {"converged", fit.converged}};
}

json to_json(const DoublingFactor& factor) {
    return json{{"factor", factor.factor}, {"constant_offset", factor.constant_offset}};
}

json to_json(const FlopsEstimate& estimate) {
    json j{{"relative", estimate.total_flops_relative}};
    j["absolute_flops"] = estimate.absolute_flops ? json(*estimate.absolute_flops) : json(nullptr);
    return j;
}

json to_json(const ProbeTask& task) {
    return json{{"sentences", task.sentences},
                {"full_sequence", task.full_sequence},
                {"first_sentence_span", {task.first_sentence_span.first, task.first_sentence_span.second}},
                {"context_length", task.context_length}};
}

json to_json(const DocumentChunk& chunk) {
    return json{{"doc_id", chunk.doc_id},
                {"chunk_index", chunk.chunk_index},
                {"text", chunk.text},
                {"token_span", {chunk.token_span.start, chunk.token_span.end}}};
}

json to_json(const TrainingInstance& instance) {
    return json{{"prompt", instance.prompt},
                {"response", instance.response},
                {"token_ids", instance.token_ids},
                {"loss_mask", instance.loss_mask}};
}

json to_json(const PackedBatch& batch) {
    json boundaries = json::array();
    for (const auto& seq : batch.boundaries) {
        json segs = json::array();
        for (const auto& s : seq) {
            segs.push_back({{"instance_id", s.instance_id}, {"start", s.start}, {"end", s.end}});
        }
        boundaries.push_back(std::move(segs));
    }
    return json{{"sequence_length", batch.sequence_length},
                {"sequences", batch.sequences},
                {"loss_masks", batch.loss_masks},
                {"boundaries", std::move(boundaries)},
                {"dropped_tokens", batch.dropped_tokens}};
}

json to_json(const PaddedSequence& padded) {
    return json{{"token_ids", padded.token_ids}, {"loss_mask", padded.loss_mask}};
}

PowerLawFit fit_from_json(const json& j) {
    try {
        PowerLawFit fit;
        fit.alpha = j.at("alpha").get<double>();
        fit.beta = j.at("beta").get<double>();
        fit.gamma = j.at("gamma").get<double>();
        fit.rmse = j.value("rmse", 0.0);
        fit.iterations = j.value("iterations", 0);
        fit.converged = j.value("converged", false);
        require(fit.alpha > 0.0 && fit.beta > 0.0 && fit.gamma >= 0.0,
                "fit record needs alpha > 0, beta > 0, gamma >= 0");
        return fit;
    } catch (const json::exception& e) {
        fail(std::string("malformed fit record: ") + e.what());
    }
}

namespace {

std::string id_string(const json& id) {
    return id.is_string() ? id.get<std::string>() : id.dump();
}

} // namespace

DocumentChunk chunk_from_json(const json& j) {
    try {
        DocumentChunk chunk;
        chunk.doc_id = id_string(j.at("doc_id"));
        chunk.chunk_index = j.at("chunk_index").get<std::size_t>();
        chunk.text = j.at("text").get<std::string>();
        const auto& span = j.at("token_span");
        chunk.token_span = {span.at(0).get<std::size_t>(), span.at(1).get<std::size_t>()};
        return chunk;
    } catch (const json::exception& e) {
        fail(std::string("malformed chunk record: ") + e.what());
    }
}

TrainingInstance instance_from_json(const json& j) {
    try {
        TrainingInstance instance;
        instance.prompt = j.at("prompt").get<std::string>();
        instance.response = j.at("response").get<std::string>();
        instance.token_ids = j.at("token_ids").get<std::vector<TokenId>>();
        instance.loss_mask = j.at("loss_mask").get<std::vector<bool>>();
        require(instance.token_ids.size() == instance.loss_mask.size(),
                "instance token_ids and loss_mask differ in length");
        return instance;
    } catch (const json::exception& e) {
        fail(std::string("malformed instance record: ") + e.what());
    }
}

std::vector<json> read_ndjson(std::istream& in) {
    std::vector<json> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            records.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            fail("invalid JSON on line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

void write_ndjson(std::ostream& out, const std::vector<json>& records) {
    for (const auto& r : records) {
        out << r.dump() << '\n';
    }
}

std::vector<Document> read_documents(std::istream& in) {
    std::vector<Document> docs;
    for (const auto& r : read_ndjson(in)) {
        try {
            docs.push_back({id_string(r.at("doc_id")), r.at("text").get<std::string>()});
        } catch (const json::exception& e) {
            fail(std::string("malformed document record: ") + e.what());
        }
    }
    return docs;
}

} // namespace ropelab::io
