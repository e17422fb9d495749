#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vdt/trace_model.hpp"

namespace vdt {

inline constexpr std::size_t kSeqLen = 15;
inline constexpr std::size_t kOuterWidth = 15;
inline constexpr std::size_t kBottleneck = 6;

using Pattern = std::array<double, kSeqLen>;

struct MosSequence {
    std::string session_id;
    Pattern values{};
    std::size_t valid_len = 0;

    bool operator==(const MosSequence&) const = default;
};

// First 15 MOS values; shorter sessions are padded with their last value. Throws below 12 samples.
MosSequence to_sequence(const Session& s);
// Sequences of the model-eligible sessions, in dataset order.
std::vector<MosSequence> to_sequences(const Dataset& d);

struct SequenceSplit {
    std::vector<MosSequence> train;
    std::vector<MosSequence> validation;
    std::vector<MosSequence> test;
};

// |test| = round((1-ratio)·n), then |validation| = round((1-ratio)·rest). Needs at least 4 sequences.
SequenceSplit split_sessions(std::span<const MosSequence> seqs, double ratio, std::uint64_t seed);

struct LstmShape {
    std::size_t input = 0;
    std::size_t hidden = 0;
    std::size_t offset = 0;  // start of W (4H×I), then U (4H×H), then b (4H)

    std::size_t size() const { return 4 * hidden * (input + hidden + 1); }
};

struct ParamGroup {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
};

/// Encoder LSTM(15, sequence) -> LSTM(6, final state); the 6-wide state is repeated over
/// 15 steps into decoder LSTM(6) -> LSTM(15) and a per-step affine head with ReLU.
/// Encoder layers stop at valid_len, so padded inputs never reach the bottleneck.
class Autoencoder {
public:
    Autoencoder();

    // Uniform in ±1/sqrt(fan_in); forget-gate biases 1; head bias = output_bias.
    static Autoencoder initialized(std::uint64_t seed, double output_bias);

    std::array<double, kBottleneck> encode(const MosSequence& seq) const;
    Pattern decode(const std::array<double, kBottleneck>& z) const;
    Pattern reconstruct_raw(const MosSequence& seq) const;
    // Clamped to [1, 5].
    Pattern reconstruct(const MosSequence& seq) const;

    // Masked mean squared error over valid positions, without dropout.
    double loss(std::span<const MosSequence> batch) const;

    // Same loss; `grad` (resized to the parameter count) receives its gradient. With dropout > 0
    // inverted-dropout masks are drawn from `rng` on every LSTM output.
    double loss_and_gradient(std::span<const MosSequence> batch, std::vector<double>& grad, double dropout = 0.0,
                             std::mt19937_64* rng = nullptr) const;

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    std::vector<ParamGroup> groups() const;

    bool operator==(const Autoencoder&) const = default;

private:
    double sequence_pass(const MosSequence& seq, double scale, std::vector<double>* grad, double dropout,
                         std::mt19937_64* rng, Pattern* out) const;

    std::vector<double> params_;
};

struct Hyper {
    std::size_t epochs = 100;
    std::size_t batch_size = 16;
    double learning_rate = 1e-3;
    double dropout = 0.0;

    bool operator==(const Hyper&) const = default;
};

struct CurvePoint {
    std::size_t epoch = 0;
    double train_mse = 0.0;
    double val_mse = 0.0;
};

struct AutoencoderModel {
    Autoencoder net;
    Hyper hyper;
    std::uint64_t seed = 0;
    std::uint64_t split_seed = 0;
    std::vector<CurvePoint> curve;
    double initial_val_mse = 0.0;
    std::vector<std::string> train_ids;
    std::vector<std::string> validation_ids;
    std::vector<std::string> test_ids;
};

struct Adam {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<double> m, v;
    std::size_t step = 0;

    void update(std::vector<double>& params, const std::vector<double>& grad, double learning_rate);
};

/// Mini-batch Adam on the masked MSE. Throws DivergenceError when the validation MSE stays
/// above 10x its pre-training value for 5 consecutive epochs.
AutoencoderModel train_autoencoder(std::span<const MosSequence> train, std::span<const MosSequence> validation,
                                   const Hyper& hyper, std::uint64_t seed);

struct HyperGrid {
    std::vector<std::size_t> epochs{100, 200};
    std::vector<std::size_t> batch_sizes{16, 32};
    std::vector<double> learning_rates{1e-3, 3e-4};
    std::vector<double> dropouts{0.0, 0.1};
};

struct GridCell {
    Hyper hyper;
    double val_mse = 0.0;
    bool diverged = false;
};

struct GridResult {
    AutoencoderModel best;
    std::vector<GridCell> cells;
};

// Full grid; lowest final validation MSE wins, earlier cells on ties.
GridResult grid_search(std::span<const MosSequence> train, std::span<const MosSequence> validation,
                       const HyperGrid& grid, std::uint64_t seed);

struct TypicalPattern {
    Pattern values{};
    std::size_t n_sessions_aggregated = 0;
};

TypicalPattern typical_pattern(const Autoencoder& net, std::span<const MosSequence> seqs);

// Pointwise mean of the raw (padded) sequences.
Pattern plain_average(std::span<const MosSequence> seqs);

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t n_checked = 0;
};

// f(params, grad*) returns the loss and, when grad is non-null, fills the analytic gradient.
using LossFn = std::function<double(std::span<const double>, std::vector<double>*)>;

// Central differences on the listed coordinates. Relative error is |a - n| / max(|a|, |n|, 1e-7).
GradCheckResult gradient_check(const LossFn& f, std::span<const double> params, std::span<const std::size_t> indices,
                               double epsilon);

// At least `min_weights` coordinates spread over every parameter group, dropout off.
GradCheckResult gradient_check(const Autoencoder& net, std::span<const MosSequence> batch, double epsilon,
                               std::size_t min_weights = 260, std::uint64_t seed = 1);

void save_model(const AutoencoderModel& model, const std::filesystem::path& path);
AutoencoderModel load_model(const std::filesystem::path& path);

void write_pattern_csv(const TypicalPattern& p, const std::filesystem::path& path);
TypicalPattern read_pattern_csv(const std::filesystem::path& path);

}  // namespace vdt
