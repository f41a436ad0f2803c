#include "ropelab/cli.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <sstream>

#include "CLI11.hpp"

#include "ropelab/attention_probe.hpp"
#include "ropelab/error.hpp"
#include "ropelab/io.hpp"
#include "ropelab/pe_theory.hpp"
#include "ropelab/scaling_law.hpp"
#include "ropelab/selfinstruct.hpp"

namespace ropelab::cli {

using io::json;

const std::vector<std::string_view>& subcommands() {
    static const std::vector<std::string_view> names{
        "decay",         "helix",         "bounds",         "theorem-check",   "granularity",  "theta1",
        "fit",           "predict",       "flops",          "probe-mass",      "grad-check",   "fsr-task",
        "bucket-loss",   "datagen-chunk", "datagen-render", "datagen-extract", "datagen-pack"};
    return names;
}

const std::vector<Route>& operation_routes() {
    static const std::vector<Route> routes{
        {"pe_core", "rotation_angle", "decay"},
        {"pe_core", "rotate_real", "decay"},
        {"pe_core", "decay_curve", "decay"},
        {"pe_core", "helix_trace", "helix"},
        {"pe_core", "embed", "theorem-check"},
        {"pe_core", "inner_product", "theorem-check"},
        {"pe_core", "sine_similarity", "theorem-check"},
        {"pe_core", "min_pairwise_distance", "granularity"},
        {"pe_core", "embedding_drift", "granularity"},
        {"pe_theory", "c_d", "bounds"},
        {"pe_theory", "limit_bounds", "bounds"},
        {"pe_theory", "verify_consecutive_similarity", "theorem-check"},
        {"pe_theory", "granularity_compare", "granularity"},
        {"pe_theory", "theta1_relative_difference", "theta1"},
        {"attention_probe", "attention_forward", "grad-check"},
        {"attention_probe", "gradient_check", "grad-check"},
        {"attention_probe", "allones_attention_mass", "probe-mass"},
        {"attention_probe", "make_first_sentence_task", "fsr-task"},
        {"attention_probe", "score_first_sentence", "fsr-task"},
        {"attention_probe", "bucket_positional_loss", "bucket-loss"},
        {"scaling_law", "fit_power_law", "fit"},
        {"scaling_law", "doubling_loss_factor", "fit"},
        {"scaling_law", "predict_loss", "predict"},
        {"scaling_law", "curriculum_flops", "flops"},
        {"scaling_law", "calibrate_cost_ratio", "flops"},
        {"selfinstruct_gen", "chunk_document", "datagen-chunk"},
        {"selfinstruct_gen", "render_qa_prompt", "datagen-render"},
        {"selfinstruct_gen", "extract_qa", "datagen-extract"},
        {"selfinstruct_gen", "build_instance", "datagen-extract"},
        {"selfinstruct_gen", "pack_short_instances", "datagen-pack"},
        {"selfinstruct_gen", "pad_long_instance", "datagen-pack"},
    };
    return routes;
}

namespace {

class IoFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PEArgs {
    std::string pe = "rope";
    double base = PEVariant::kDefaultBase;
    int dim = 128;
    double alpha = 0.0;
    double beta = 0.0;
    double smoothing = PEVariant::kDefaultXPosSmoothing;
    double scale_base = PEVariant::kDefaultXPosScaleBase;
    CLI::Option* alpha_opt = nullptr;
    CLI::Option* beta_opt = nullptr;
    CLI::Option* smoothing_opt = nullptr;
    CLI::Option* scale_base_opt = nullptr;
};

void add_pe_options(CLI::App* sub, PEArgs& args) {
    sub->add_option("--pe", args.pe, "Positional encoding: rope, pi, abf, xpos-abf")
        ->check(CLI::IsMember({"rope", "pi", "abf", "xpos-abf"}))
        ->capture_default_str();
    sub->add_option("--base", args.base, "Base frequency b")->capture_default_str();
    sub->add_option("--dim", args.dim, "Head dimension d")->capture_default_str();
    args.alpha_opt = sub->add_option("--alpha", args.alpha, "PI scale alpha (pi only)");
    args.beta_opt = sub->add_option("--beta", args.beta, "ABF multiplier beta (abf, xpos-abf)");
    args.smoothing_opt = sub->add_option("--xpos-smoothing", args.smoothing, "xPos smoothing (xpos-abf only)");
    args.scale_base_opt = sub->add_option("--xpos-scale-base", args.scale_base, "xPos scale base (xpos-abf only)");
}

PEVariant build_variant(const PEArgs& args) {
    static const std::map<std::string, PEKind> kinds{
        {"rope", PEKind::RoPE}, {"pi", PEKind::RoPE_PI}, {"abf", PEKind::RoPE_ABF}, {"xpos-abf", PEKind::XPos_ABF}};
    const PEKind kind = kinds.at(args.pe);
    const auto given = [](const CLI::Option* o) { return o != nullptr && o->count() > 0; };

    if (kind == PEKind::RoPE_PI && !given(args.alpha_opt)) {
        throw UsageError("--alpha is required for --pe pi");
    }
    if (kind != PEKind::RoPE_PI && given(args.alpha_opt)) {
        throw UsageError("--alpha is only valid with --pe pi");
    }
    const bool wants_beta = kind == PEKind::RoPE_ABF || kind == PEKind::XPos_ABF;
    if (wants_beta && !given(args.beta_opt)) {
        throw UsageError("--beta is required for --pe " + args.pe);
    }
    if (!wants_beta && given(args.beta_opt)) {
        throw UsageError("--beta is only valid with --pe abf or --pe xpos-abf");
    }
    if (kind != PEKind::XPos_ABF && (given(args.smoothing_opt) || given(args.scale_base_opt))) {
        throw UsageError("--xpos-smoothing/--xpos-scale-base are only valid with --pe xpos-abf");
    }
    try {
        return PEVariant::make(kind, args.base, args.dim,
                               given(args.alpha_opt) ? std::optional(args.alpha) : std::nullopt,
                               wants_beta ? std::optional(args.beta) : std::nullopt,
                               kind == PEKind::XPos_ABF ? std::optional(args.smoothing) : std::nullopt,
                               kind == PEKind::XPos_ABF ? std::optional(args.scale_base) : std::nullopt);
    } catch (const Error& e) {
        throw UsageError(std::string("invalid positional encoding: ") + e.what());
    }
}

struct FormatRule {
    Format fallback;
    bool csv;
    bool json;
};

const std::map<std::string, FormatRule, std::less<>>& format_rules() {
    static const std::map<std::string, FormatRule, std::less<>> rules{
        {"decay", {Format::Csv, true, true}},          {"helix", {Format::Csv, true, true}},
        {"bounds", {Format::Json, false, true}},       {"theorem-check", {Format::Json, false, true}},
        {"granularity", {Format::Json, false, true}},  {"theta1", {Format::Json, false, true}},
        {"fit", {Format::Json, false, true}},          {"predict", {Format::Csv, true, false}},
        {"flops", {Format::Json, false, true}},        {"probe-mass", {Format::Csv, true, true}},
        {"grad-check", {Format::Json, false, true}},   {"fsr-task", {Format::Json, false, true}},
        {"bucket-loss", {Format::Csv, true, true}},    {"datagen-chunk", {Format::Json, false, true}},
        {"datagen-render", {Format::Json, false, true}}, {"datagen-extract", {Format::Json, false, true}},
        {"datagen-pack", {Format::Json, false, true}},
    };
    return rules;
}

} // namespace

Command parse_args(const std::vector<std::string>& argv) {
    CLI::App app{"ropelab: rotary positional-encoding, scaling-law and data-pipeline toolkit", "ropelab"};
    app.require_subcommand(1, 1);

    Command cmd;
    Options& o = cmd.options;
    std::string format;
    std::map<std::string, PEArgs> pe; // one per subcommand; map nodes stay put
    std::map<std::string, CLI::App*> subs;

    const auto add = [&](const char* name, const char* help) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--output,-o", cmd.output_path, "Write output here instead of stdout");
        sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
        subs[name] = sub;
        return sub;
    };

    auto* decay = add("decay", "All-ones attention score decay curve");
    add_pe_options(decay, pe[decay->get_name()]);
    decay->add_option("--max-dist", o.max_dist, "Largest relative distance")->capture_default_str();
    decay->add_option("--step", o.dist_step, "Distance step")->capture_default_str();
    decay->add_flag("--raw", o.raw, "Do not divide scores by d");
    decay->add_option("--threads", o.threads, "Worker threads")->capture_default_str();

    auto* helix = add("helix", "Helix trace x = cos t, y = sin t, z = sin(a t)");
    helix->add_option("--a", o.helix_a, "Frequency coefficient a")->capture_default_str();
    helix->add_option("--t-start", o.t_start)->capture_default_str();
    helix->add_option("--t-end", o.t_end)->capture_default_str();
    helix->add_option("--samples", o.samples)->capture_default_str();

    auto* bounds = add("bounds", "Limit bounds on the mean consecutive sine, plus C_d at --dim");
    add_pe_options(bounds, pe[bounds->get_name()]);

    auto* theorem = add("theorem-check", "Consecutive-image sine similarity against its bounds");
    add_pe_options(theorem, pe[theorem->get_name()]);
    theorem->add_option("--n", o.position, "Position n")->capture_default_str();
    theorem->add_option("--x", o.x, "Comma-separated vector (length d)")->delimiter(',');
    theorem->add_option("--seed", o.seed, "Seed for a standard-normal x");

    auto* gran = add("granularity", "PI vs ABF granularity (and optionally min distances and drift)");
    gran->add_option("--base", o.base)->capture_default_str();
    gran->add_option("--alpha", o.alpha)->capture_default_str();
    gran->add_option("--beta", o.beta)->capture_default_str();
    gran->add_option("--dim", o.dim)->capture_default_str();
    gran->add_option("--positions", o.positions, "Also scan this many integer positions");
    gran->add_option("--samples", o.vector_samples, "Random vectors for the position scan")->capture_default_str();
    gran->add_option("--seed", o.seed, "Seed for the position scan vectors");
    gran->add_option("--threads", o.threads)->capture_default_str();

    auto* theta1 = add("theta1", "Relative change of theta_1 between two base frequencies");
    theta1->add_option("--dim", o.dim)->capture_default_str();
    theta1->add_option("--from", o.b_from)->capture_default_str();
    theta1->add_option("--to", o.b_to)->capture_default_str();

    auto* fit = add("fit", "Fit L(c) = (alpha/c)^beta + gamma to a context_length,loss CSV");
    fit->add_option("--input", o.input_path)->required();

    auto* predict = add("predict", "Predicted loss from a fit record");
    predict->add_option("--fit", o.fit_path, "JSON fit record")->required();
    predict->add_option("--context", o.contexts, "Comma-separated context lengths")->delimiter(',')->required();

    auto* flops = add("flops", "Relative training FLOPs of a short-to-long curriculum");
    flops->add_option("--p", o.switch_fraction, "Switch fraction")->capture_default_str();
    flops->add_option("--cost-ratio", o.cost_ratio, "Per-token cost ratio f(short)/f(long)");
    flops->add_option("--calibrate", o.calibrate_path, "CSV p,total_flops; fit the cost ratio");
    flops->add_option("--total-tokens", o.total_tokens);
    flops->add_option("--long-token-cost", o.long_token_cost, "FLOPs per token at the long length");

    auto* probe = add("probe-mass", "All-ones attention mass on an early position");
    add_pe_options(probe, pe[probe->get_name()]);
    probe->add_option("--seq-len", o.seq_lens, "Comma-separated sequence lengths")->delimiter(',')->required();
    probe->add_option("--target", o.target)->capture_default_str();

    auto* grad = add("grad-check", "Attention gradients vs central finite differences");
    add_pe_options(grad, pe[grad->get_name()]);
    grad->add_option("--seq-len", o.seq_len)->capture_default_str();
    grad->add_option("--seed", o.seed)->required();
    grad->add_flag("!--non-causal", o.causal, "Disable the causal mask");

    auto* fsr = add("fsr-task", "First-sentence-retrieval probe task (and scoring)");
    fsr->add_option("--sentences", o.n_sentences)->capture_default_str();
    fsr->add_option("--tokens-per-sentence", o.tokens_per_sentence)->capture_default_str();
    fsr->add_option("--seed", o.seed)->required();
    fsr->add_option("--response", o.response_path, "File of response token ids to score");

    auto* bucket = add("bucket-loss", "Mean per-position loss in fixed-width buckets");
    bucket->add_option("--input", o.input_path, "One loss per line")->required();
    bucket->add_option("--width", o.bucket_width)->capture_default_str();

    auto* dchunk = add("datagen-chunk", "Split NDJSON documents into token chunks");
    dchunk->add_option("--input", o.input_path, "NDJSON {doc_id, text}")->required();
    dchunk->add_option("--chunk-tokens", o.chunk_tokens)->capture_default_str();
    dchunk->add_option("--overlap", o.overlap)->capture_default_str();

    auto* drender = add("datagen-render", "Render QA-generation prompts for chunks");
    drender->add_option("--input", o.input_path, "NDJSON chunks")->required();
    drender->add_option("--style", o.style)->check(CLI::IsMember({"normal", "short"}))->capture_default_str();

    auto* dextract = add("datagen-extract", "Extract QA pairs from responses and build training instances");
    dextract->add_option("--input", o.input_path, "NDJSON {doc_id, chunk_index, response[, style]}")->required();
    dextract->add_option("--docs", o.docs_path, "NDJSON documents")->required();
    dextract->add_option("--chunks", o.chunks_path, "NDJSON chunks")->required();
    dextract->add_option("--style", o.style)->check(CLI::IsMember({"normal", "short"}))->capture_default_str();
    dextract->add_option("--max-context", o.max_context)->capture_default_str();
    dextract->add_option("--loss-policy", o.loss_policy)
        ->check(CLI::IsMember({"output_only", "include_input_lm_loss"}))
        ->capture_default_str();

    auto* dpack = add("datagen-pack", "Pack short instances or pad long ones to a fixed length");
    dpack->add_option("--input", o.input_path, "NDJSON instances")->required();
    dpack->add_option("--seq-len", o.pack_length)->capture_default_str();
    dpack->add_option("--mode", o.pack_mode)->check(CLI::IsMember({"pack", "pad"}))->capture_default_str();
    dpack->add_option("--pad-id", o.pad_id)->capture_default_str();

    std::vector<std::string> storage{"ropelab"};
    storage.insert(storage.end(), argv.begin(), argv.end());
    std::vector<char*> raw;
    for (auto& s : storage) {
        raw.push_back(s.data());
    }
    try {
        app.parse(static_cast<int>(raw.size()), raw.data());
    } catch (const CLI::CallForHelp&) {
        const auto chosen = app.get_subcommands();
        throw HelpRequested(chosen.empty() ? app.help() : chosen.front()->help());
    } catch (const CLI::CallForAllHelp&) {
        throw HelpRequested(app.help("", CLI::AppFormatMode::All));
    } catch (const CLI::ParseError& e) {
        std::string msg = e.what();
        if (const auto nl = msg.find('\n'); nl != std::string::npos) {
            msg.resize(nl);
        }
        throw UsageError(msg);
    }

    cmd.subcommand = app.get_subcommands().front()->get_name();
    for (const char* name : {"decay", "bounds", "theorem-check", "probe-mass", "grad-check"}) {
        if (cmd.subcommand == name) {
            o.variant = build_variant(pe.at(cmd.subcommand));
        }
    }

    const auto& rule = format_rules().at(cmd.subcommand);
    cmd.format = rule.fallback;
    if (format == "csv") {
        if (!rule.csv) {
            throw UsageError("--format csv is not available for " + cmd.subcommand);
        }
        cmd.format = Format::Csv;
    } else if (format == "json") {
        if (!rule.json) {
            throw UsageError("--format json is not available for " + cmd.subcommand);
        }
        cmd.format = Format::Json;
    }

    if (cmd.subcommand == "theorem-check" && o.x.empty() && !o.seed) {
        throw UsageError("--x or --seed is required for theorem-check");
    }
    if (cmd.subcommand == "granularity" && o.positions > 0 && !o.seed) {
        throw UsageError("--seed is required with --positions");
    }
    if (cmd.subcommand == "flops" && !o.cost_ratio && o.calibrate_path.empty()) {
        throw UsageError("--cost-ratio or --calibrate is required for flops");
    }
    if (cmd.subcommand == "flops" && o.long_token_cost && !o.total_tokens) {
        throw UsageError("--total-tokens is required with --long-token-cost");
    }
    if (o.threads == 0) {
        throw UsageError("--threads must be >= 1");
    }
    return cmd;
}

namespace {

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoFailure("cannot open input file '" + path + "'");
    }
    return in;
}

std::vector<double> standard_normal(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) {
        x = normal(rng);
    }
    return v;
}

void emit_json(std::ostream& out, const json& j) {
    out << j.dump(2) << '\n';
}

void run_decay(const Command& c, std::ostream& out) {
    const auto& o = c.options;
    if (o.max_dist < 0 || o.dist_step < 1) {
        fail("--max-dist must be >= 0 and --step >= 1");
    }
    std::vector<long long> distances;
    for (long long d = 0; d <= o.max_dist; d += o.dist_step) {
        distances.push_back(d);
    }
    const auto curve = decay_curve(*o.variant, distances, !o.raw, {o.threads});
    if (c.format == Format::Csv) {
        io::write_decay_csv(out, curve);
    } else {
        emit_json(out, {{"variant", io::to_json(curve.variant)},
                        {"normalized", curve.normalized},
                        {"delta", curve.distances},
                        {"score", curve.scores}});
    }
}

void run_helix(const Command& c, std::ostream& out) {
    const auto& o = c.options;
    const auto trace = helix_trace(o.helix_a, o.t_start, o.t_end, o.samples);
    if (c.format == Format::Csv) {
        io::write_helix_csv(out, trace);
        return;
    }
    json samples = json::array();
    for (const auto& s : trace.samples) {
        samples.push_back({s.t, s.x, s.y, s.z});
    }
    emit_json(out, {{"frequency_coefficient", trace.frequency_coefficient}, {"samples", samples}});
}

void run_bounds(const Command& c, std::ostream& out) {
    const auto& v = *c.options.variant;
    auto j = io::to_json(limit_bounds(v));
    j["c_d"] = c_d(v);
    j["c_d_mean"] = c_d_mean(v);
    emit_json(out, j);
}

void run_theorem(const Command& c, std::ostream& out) {
    const auto& o = c.options;
    const auto& v = *o.variant;
    const auto x = o.x.empty() ? standard_normal(static_cast<std::size_t>(v.head_dim()), *o.seed) : o.x;
    emit_json(out, io::to_json(verify_consecutive_similarity(v, x, o.position)));
}

void run_granularity(const Command& c, std::ostream& out) {
    const auto& o = c.options;
    const auto pi = PEVariant::pi(o.base, o.dim, o.alpha);
    const auto abf = PEVariant::abf(o.base, o.dim, o.beta);
    auto j = io::to_json(granularity_compare(pi, abf));
    if (o.positions > 0) {
        require(o.vector_samples >= 1, "--samples must be >= 1");
        const auto rope = PEVariant::rope(o.base, o.dim);
        std::mt19937_64 seeds(*o.seed);
        std::vector<std::vector<double>> xs;
        for (int i = 0; i < o.vector_samples; ++i) {
            xs.push_back(standard_normal(static_cast<std::size_t>(o.dim), seeds()));
        }
        const auto closest = [&](const PEVariant& v) {
            ClosestPair best{std::numeric_limits<double>::infinity(), -1, -1};
            for (const auto& x : xs) {
                const auto p = min_pairwise_distance(v, x, o.positions, {o.threads});
                if (p.distance < best.distance) {
                    best = p;
                }
            }
            return json{{"distance", best.distance}, {"pair", {best.first, best.second}}};
        };
        j["positions"] = o.positions;
        j["min_pairwise_distance"] = {{"pi", closest(pi)}, {"abf", closest(abf)}};
        j["embedding_drift"] = {
            {"pi", embedding_drift(rope, pi, xs, o.positions, o.positions, {o.threads})},
            {"abf", embedding_drift(rope, abf, xs, o.positions, o.positions, {o.threads})}};
    }
    emit_json(out, j);
}

void run_theta1(const Command& c, std::ostream& out) {
    const auto& o = c.options;
    emit_json(out, {{"d", o.dim},
                    {"b_old", o.b_from},
                    {"b_new", o.b_to},
                    {"relative_difference", theta1_relative_difference(o.dim, o.b_from, o.b_to)}});
}

void run_fit(const Command& c, std::ostream& out) {
    auto in = open_input(c.options.input_path);
    const auto points = io::read_loss_csv(in);
    const auto fit = fit_power_law(points);
    auto j = io::to_json(fit);
    j["doubling"] = io::to_json(doubling_loss_factor(fit));
    emit_json(out, j);
}

void run_predict(const Command& c, std::ostream& out) {
    auto in = open_input(c.options.fit_path);
    json record;
    try {
        record = json::parse(in);
    } catch (const json::parse_error& e) {
        fail(std::string("invalid fit record: ") + e.what());
    }
    io::write_prediction_csv(out, io::fit_from_json(record), c.options.contexts);
}

void run_flops(const Command& c, std::ostream& out) {
    const auto& o = c.options;
    json j;
    double ratio = o.cost_ratio.value_or(0.0);
    if (!o.calibrate_path.empty()) {
        auto in = open_input(o.calibrate_path);
        const auto table = io::read_flops_csv(in);
        ratio = calibrate_cost_ratio(table);
        j["calibrated_cost_ratio"] = ratio;
        const auto base = std::find_if(table.begin(), table.end(), [](const FlopsRow& r) { return r.switch_fraction == 0.0; });
        json rows = json::array();
        for (const auto& r : table) {
            CurriculumSchedule s;
            s.switch_fraction = r.switch_fraction;
            s.cost_ratio = ratio;
            rows.push_back({{"p", r.switch_fraction},
                            {"observed", r.total_flops / base->total_flops},
                            {"predicted", curriculum_flops(s).total_flops_relative}});
        }
        j["rows"] = rows;
    }
    CurriculumSchedule schedule;
    schedule.switch_fraction = o.switch_fraction;
    schedule.cost_ratio = ratio;
    schedule.total_tokens = o.total_tokens.value_or(0.0);
    const auto estimate = curriculum_flops(schedule, o.long_token_cost);
    j["p"] = o.switch_fraction;
    j["cost_ratio"] = ratio;
    j["relative"] = estimate.total_flops_relative;
    j["absolute_flops"] = estimate.absolute_flops ? json(*estimate.absolute_flops) : json(nullptr);
    emit_json(out, j);
}

void run_probe(const Command& c, std::ostream& out) {
    const auto& o = c.options;
    std::vector<io::ProbeMassRow> rows;
    for (auto len : o.seq_lens) {
        rows.push_back({len, o.variant->label(), allones_attention_mass(*o.variant, len, o.target)});
    }
    if (c.format == Format::Csv) {
        io::write_probe_mass_csv(out, rows);
        return;
    }
    json arr = json::array();
    for (const auto& r : rows) {
        arr.push_back({{"seq_len", r.seq_len}, {"variant", r.variant}, {"mass_on_first", r.mass_on_first}});
    }
    emit_json(out, arr);
}

void run_grad(const Command& c, std::ostream& out) {
    const auto& o = c.options;
    AttentionConfig config{*o.variant, o.seq_len, o.causal, std::nullopt, 0};
    const double err = gradient_check(config, *o.seed);
    emit_json(out, {{"variant", io::to_json(*o.variant)},
                    {"seq_len", o.seq_len},
                    {"causal", o.causal},
                    {"seed", *o.seed},
                    {"max_relative_error", err}});
}

void run_fsr(const Command& c, std::ostream& out) {
    const auto& o = c.options;
    const auto task = make_first_sentence_task(o.n_sentences, o.tokens_per_sentence, *o.seed);
    auto j = io::to_json(task);
    if (!o.response_path.empty()) {
        auto in = open_input(o.response_path);
        std::vector<Token> response;
        for (double v : io::read_number_column(in)) {
            response.push_back(static_cast<Token>(v));
        }
        const auto score = score_first_sentence(task, response);
        j["score"] = {{"exact_match", score.exact_match}, {"token_overlap", score.token_overlap}};
    }
    emit_json(out, j);
}

void run_bucket(const Command& c, std::ostream& out) {
    auto in = open_input(c.options.input_path);
    const auto losses = io::read_number_column(in);
    const auto buckets = bucket_positional_loss(losses, c.options.bucket_width);
    if (c.format == Format::Csv) {
        io::write_bucket_csv(out, buckets);
    } else {
        emit_json(out, {{"bucket_width", buckets.bucket_width},
                        {"bucket_means", buckets.bucket_means},
                        {"n_positions", buckets.n_positions}});
    }
}

AnswerStyle parse_style(const std::string& s) {
    if (s == "normal") {
        return AnswerStyle::Normal;
    }
    if (s == "short") {
        return AnswerStyle::Short;
    }
    fail("unknown answer style '" + s + "'");
}

void run_chunk(const Command& c, std::ostream& out) {
    auto in = open_input(c.options.input_path);
    const SplitTokenizer tokenizer;
    std::vector<json> records;
    for (const auto& doc : io::read_documents(in)) {
        for (const auto& chunk : chunk_document(doc.doc_id, doc.text, tokenizer, c.options.chunk_tokens,
                                                c.options.overlap)) {
            records.push_back(io::to_json(chunk));
        }
    }
    io::write_ndjson(out, records);
}

void run_render(const Command& c, std::ostream& out) {
    auto in = open_input(c.options.input_path);
    const auto style = parse_style(c.options.style);
    std::vector<json> records;
    for (const auto& r : io::read_ndjson(in)) {
        const auto chunk = io::chunk_from_json(r);
        records.push_back({{"doc_id", chunk.doc_id},
                           {"chunk_index", chunk.chunk_index},
                           {"style", answer_style_name(style)},
                           {"prompt", render_qa_prompt(chunk, style)}});
    }
    io::write_ndjson(out, records);
}

void run_extract(const Command& c, std::ostream& out, std::ostream& diag) {
    const auto& o = c.options;
    auto docs_in = open_input(o.docs_path);
    auto chunks_in = open_input(o.chunks_path);
    auto responses_in = open_input(o.input_path);

    std::map<std::string, std::string> docs;
    for (auto& d : io::read_documents(docs_in)) {
        docs[d.doc_id] = std::move(d.text);
    }
    std::map<std::pair<std::string, std::size_t>, DocumentChunk> chunks;
    for (const auto& r : io::read_ndjson(chunks_in)) {
        auto chunk = io::chunk_from_json(r);
        chunks[{chunk.doc_id, chunk.chunk_index}] = std::move(chunk);
    }

    const SplitTokenizer tokenizer;
    const auto policy =
        o.loss_policy == "include_input_lm_loss" ? LossPolicy::IncludeInputLmLoss : LossPolicy::OutputOnly;
    std::vector<json> records;
    std::size_t skipped = 0;
    for (const auto& r : io::read_ndjson(responses_in)) {
        std::string doc_id;
        std::size_t index = 0;
        std::string response;
        std::string style_name = o.style;
        try {
            doc_id = r.at("doc_id").is_string() ? r.at("doc_id").get<std::string>() : r.at("doc_id").dump();
            index = r.at("chunk_index").get<std::size_t>();
            response = r.at("response").get<std::string>();
            style_name = r.value("style", o.style);
        } catch (const json::exception& e) {
            fail(std::string("malformed response record: ") + e.what());
        }
        const auto doc = docs.find(doc_id);
        const auto chunk = chunks.find({doc_id, index});
        if (doc == docs.end() || chunk == chunks.end()) {
            fail("response refers to unknown document/chunk " + doc_id + "#" + std::to_string(index));
        }
        try {
            const auto qa = extract_qa(response, parse_style(style_name));
            records.push_back(io::to_json(
                build_instance(doc->second, chunk->second, qa, tokenizer, o.max_context, policy)));
        } catch (const TagError& e) {
            ++skipped;
            diag << "skipped " << doc_id << "#" << index << ": " << e.what() << '\n';
        }
    }
    io::write_ndjson(out, records);
    if (skipped > 0) {
        diag << "skipped " << skipped << " responses without a usable QA pair\n";
    }
}

void run_pack(const Command& c, std::ostream& out) {
    const auto& o = c.options;
    auto in = open_input(o.input_path);
    std::vector<TrainingInstance> instances;
    for (const auto& r : io::read_ndjson(in)) {
        instances.push_back(io::instance_from_json(r));
    }
    if (o.pack_mode == "pack") {
        emit_json(out, io::to_json(pack_short_instances(instances, o.pack_length)));
        return;
    }
    json padded = json::array();
    for (const auto& inst : instances) {
        padded.push_back(io::to_json(pad_long_instance(inst, o.pack_length, o.pad_id)));
    }
    emit_json(out, {{"sequence_length", o.pack_length}, {"pad_id", o.pad_id}, {"sequences", padded}});
}

} // namespace

int run(const Command& command, std::ostream& out, std::ostream& diag) {
    using Handler = std::function<void(const Command&, std::ostream&)>;
    const std::map<std::string_view, Handler> handlers{
        {"decay", run_decay},
        {"helix", run_helix},
        {"bounds", run_bounds},
        {"theorem-check", run_theorem},
        {"granularity", run_granularity},
        {"theta1", run_theta1},
        {"fit", run_fit},
        {"predict", run_predict},
        {"flops", run_flops},
        {"probe-mass", run_probe},
        {"grad-check", run_grad},
        {"fsr-task", run_fsr},
        {"bucket-loss", run_bucket},
        {"datagen-chunk", run_chunk},
        {"datagen-render", run_render},
        {"datagen-extract", [&diag](const Command& c, std::ostream& o) { run_extract(c, o, diag); }},
        {"datagen-pack", run_pack},
    };

    const auto handler = handlers.find(command.subcommand);
    if (handler == handlers.end()) {
        diag << "error: unknown subcommand '" << command.subcommand << "'\n";
        return 2;
    }

    std::ostringstream buffer;
    try {
        handler->second(command, buffer);
    } catch (const IoFailure& e) {
        diag << "IoError: " << e.what() << '\n';
        return 4;
    } catch (const Error& e) {
        diag << e.name() << ": " << e.what() << '\n';
        return e.kind() == ErrorKind::Io ? 4 : 3;
    } catch (const std::invalid_argument& e) {
        diag << "InvalidArgument: " << e.what() << '\n';
        return 3;
    }

    if (command.output_path.empty()) {
        out << buffer.str();
        out.flush();
        return 0;
    }
    std::ofstream file(command.output_path, std::ios::binary);
    file << buffer.str();
    if (!file) {
        diag << "IoError: cannot write '" << command.output_path << "'\n";
        return 4;
    }
    return 0;
}

int main_entry(const std::vector<std::string>& argv, std::ostream& out, std::ostream& diag) {
    Command command;
    try {
        command = parse_args(argv);
    } catch (const HelpRequested& help) {
        out << help.what();
        return 0;
    } catch (const UsageError& e) {
        diag << "usage error: " << e.what() << '\n';
        return 2;
    }
    return run(command, out, diag);
}

} // namespace ropelab::cli
