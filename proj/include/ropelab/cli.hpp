#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ropelab/pe_core.hpp"

namespace ropelab::cli {

enum class Format { Csv, Json };

// Bad flags or flag combinations (exit code 2).
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// --help was requested; what() holds the help text.
class HelpRequested : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Parsed options for every subcommand. Only the fields relevant to
// `subcommand` are meaningful.
struct Options {
    // positional encoding
    std::optional<PEVariant> variant;

    // decay
    long long max_dist = 8192;
    long long dist_step = 1;
    bool raw = false;
    unsigned threads = 1;

    // helix
    double helix_a = 1.0;
    double t_start = 0.0;
    double t_end = 10.0;
    int samples = 11;

    // theorem-check, granularity, grad-check, fsr-task
    std::optional<std::uint64_t> seed;
    long long position = 0;
    std::vector<double> x;
    long long positions = 0;
    int vector_samples = 8;
    double alpha = 0.25;
    double beta = 50.0;
    double base = 10000.0;
    int dim = 128;

    // theta1
    double b_from = 10000.0;
    double b_to = 500000.0;

    // fit, predict, bucket-loss, datagen-*
    std::string input_path;
    std::string fit_path;
    std::vector<double> contexts;
    std::size_t bucket_width = 500;

    // flops
    double switch_fraction = 0.0;
    std::optional<double> cost_ratio;
    std::string calibrate_path;
    std::optional<double> total_tokens;
    std::optional<double> long_token_cost;

    // probe-mass
    std::vector<std::size_t> seq_lens;
    std::size_t target = 0;
    std::size_t seq_len = 4;
    bool causal = true;

    // fsr-task
    std::size_t n_sentences = 64;
    std::size_t tokens_per_sentence = 16;
    std::string response_path;

    // datagen
    std::size_t chunk_tokens = 512;
    std::size_t overlap = 0;
    std::string style = "normal";
    std::string docs_path;
    std::string chunks_path;
    std::size_t max_context = 16384;
    std::string loss_policy = "output_only";
    std::size_t pack_length = 16384;
    std::string pack_mode = "pack";
    std::int64_t pad_id = 0;
};

struct Command {
    std::string subcommand;
    Options options;
    std::string output_path;
    Format format = Format::Json;
};

const std::vector<std::string_view>& subcommands();

// Library operation -> subcommand that exposes it.
struct Route {
    std::string_view module;
    std::string_view operation;
    std::string_view subcommand;
};
const std::vector<Route>& operation_routes();

// argv excludes the program name. Throws UsageError or HelpRequested.
Command parse_args(const std::vector<std::string>& argv);

// Executes a parsed command: 0 success, 3 numerical/domain error, 4 I/O error.
int run(const Command& command, std::ostream& out, std::ostream& diag);

// parse_args + run with the full exit-code contract (2 for usage errors).
int main_entry(const std::vector<std::string>& argv, std::ostream& out, std::ostream& diag);

} // namespace ropelab::cli
