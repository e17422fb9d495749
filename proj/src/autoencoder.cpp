#include "vdt/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "json.hpp"

#include "vdt/error.hpp"
#include "vdt/hash.hpp"
#include "vdt/synthetic_gen.hpp"
#include "vdt/text.hpp"

namespace vdt {

MosSequence to_sequence(const Session& s) {
    if (s.mos.size() < kMinMosSamples) {
        throw ValidationError("session " + s.id + " has " + std::to_string(s.mos.size()) + " MOS samples, need " +
                              std::to_string(kMinMosSamples));
    }
    MosSequence seq;
    seq.session_id = s.id;
    seq.valid_len = std::min(s.mos.size(), kSeqLen);
    for (std::size_t i = 0; i < kSeqLen; ++i) seq.values[i] = s.mos[std::min(i, seq.valid_len - 1)].mos;
    return seq;
}

std::vector<MosSequence> to_sequences(const Dataset& d) {
    std::vector<MosSequence> out;
    for (const auto& s : d.sessions) {
        if (s.model_eligible()) out.push_back(to_sequence(s));
    }
    return out;
}

SequenceSplit split_sessions(std::span<const MosSequence> seqs, double ratio, std::uint64_t seed) {
    if (seqs.size() < 4) throw ValidationError("split_sessions needs at least 4 sequences");
    if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("split ratio must lie in (0,1)");
    std::vector<std::size_t> order(seqs.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    auto n_test = static_cast<std::size_t>(std::lround((1.0 - ratio) * static_cast<double>(seqs.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, seqs.size() - 2);
    const std::size_t rest = seqs.size() - n_test;
    auto n_val = static_cast<std::size_t>(std::lround((1.0 - ratio) * static_cast<double>(rest)));
    n_val = std::clamp<std::size_t>(n_val, 1, rest - 1);

    // Each part keeps input order.
    std::vector<int> part(seqs.size(), 0);
    for (std::size_t k = 0; k < n_test; ++k) part[order[k]] = 2;
    for (std::size_t k = n_test; k < n_test + n_val; ++k) part[order[k]] = 1;
    SequenceSplit out;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        (part[i] == 0 ? out.train : part[i] == 1 ? out.validation : out.test).push_back(seqs[i]);
    }
    return out;
}

namespace {

constexpr LstmShape kEnc1{1, kOuterWidth, 0};
constexpr LstmShape kEnc2{kOuterWidth, kBottleneck, kEnc1.offset + 4 * kOuterWidth * (1 + kOuterWidth + 1)};
constexpr LstmShape kDec1{kBottleneck, kBottleneck, kEnc2.offset + 4 * kBottleneck * (kOuterWidth + kBottleneck + 1)};
constexpr LstmShape kDec2{kBottleneck, kOuterWidth, kDec1.offset + 4 * kBottleneck * (kBottleneck + kBottleneck + 1)};
constexpr std::size_t kHeadOffset = kDec2.offset + 4 * kOuterWidth * (kBottleneck + kOuterWidth + 1);
constexpr std::size_t kParamCount = kHeadOffset + kOuterWidth + 1;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Activations of one LSTM layer over T steps. h and c hold T+1 states, index 0 is the zero state.
struct LstmTrace {
    std::size_t steps = 0;
    std::vector<double> x;      // T×I
    std::vector<double> gates;  // T×4H: i, f, g, o after activation
    std::vector<double> h, c;   // (T+1)×H

    const double* h_at(std::size_t t, std::size_t H) const { return h.data() + (t + 1) * H; }
};

void lstm_forward(const double* p, const LstmShape& s, const double* xs, std::size_t T, LstmTrace& tr) {
    const std::size_t I = s.input, H = s.hidden;
    const double* W = p + s.offset;
    const double* U = W + 4 * H * I;
    const double* b = U + 4 * H * H;
    tr.steps = T;
    tr.x.assign(xs, xs + T * I);
    tr.gates.assign(T * 4 * H, 0.0);
    tr.h.assign((T + 1) * H, 0.0);
    tr.c.assign((T + 1) * H, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        const double* x = xs + t * I;
        const double* h_prev = tr.h.data() + t * H;
        const double* c_prev = tr.c.data() + t * H;
        double* g = tr.gates.data() + t * 4 * H;
        for (std::size_t r = 0; r < 4 * H; ++r) {
            double z = b[r];
            const double* wr = W + r * I;
            for (std::size_t k = 0; k < I; ++k) z += wr[k] * x[k];
            const double* ur = U + r * H;
            for (std::size_t k = 0; k < H; ++k) z += ur[k] * h_prev[k];
            g[r] = (r >= 2 * H && r < 3 * H) ? std::tanh(z) : sigmoid(z);
        }
        double* h = tr.h.data() + (t + 1) * H;
        double* c = tr.c.data() + (t + 1) * H;
        for (std::size_t j = 0; j < H; ++j) {
            c[j] = g[H + j] * c_prev[j] + g[j] * g[2 * H + j];
            h[j] = g[3 * H + j] * std::tanh(c[j]);
        }
    }
}

// dh_out: T×H gradient arriving at each step's output. Writes dx (T×I) and accumulates into grad.
void lstm_backward(const double* p, const LstmShape& s, const LstmTrace& tr, const double* dh_out, double* grad,
                   double* dx) {
    const std::size_t I = s.input, H = s.hidden, T = tr.steps;
    const double* W = p + s.offset;
    const double* U = W + 4 * H * I;
    double* gW = grad + s.offset;
    double* gU = gW + 4 * H * I;
    double* gb = gU + 4 * H * H;

    std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0), dz(4 * H);
    for (std::size_t t = T; t-- > 0;) {
        const double* g = tr.gates.data() + t * 4 * H;
        const double* c = tr.c.data() + (t + 1) * H;
        const double* c_prev = tr.c.data() + t * H;
        const double* h_prev = tr.h.data() + t * H;
        const double* x = tr.x.data() + t * I;
        for (std::size_t j = 0; j < H; ++j) {
            const double i_g = g[j], f_g = g[H + j], g_g = g[2 * H + j], o_g = g[3 * H + j];
            const double dh = dh_out[t * H + j] + dh_next[j];
            const double tc = std::tanh(c[j]);
            const double dc = dc_next[j] + dh * o_g * (1.0 - tc * tc);
            dz[j] = dc * g_g * i_g * (1.0 - i_g);
            dz[H + j] = dc * c_prev[j] * f_g * (1.0 - f_g);
            dz[2 * H + j] = dc * i_g * (1.0 - g_g * g_g);
            dz[3 * H + j] = dh * tc * o_g * (1.0 - o_g);
            dc_next[j] = dc * f_g;
        }
        std::fill(dh_next.begin(), dh_next.end(), 0.0);
        double* dxt = dx + t * I;
        std::fill(dxt, dxt + I, 0.0);
        for (std::size_t r = 0; r < 4 * H; ++r) {
            const double d = dz[r];
            if (d == 0.0) continue;
            gb[r] += d;
            const double* wr = W + r * I;
            double* gwr = gW + r * I;
            for (std::size_t k = 0; k < I; ++k) {
                gwr[k] += d * x[k];
                dxt[k] += d * wr[k];
            }
            const double* ur = U + r * H;
            double* gur = gU + r * H;
            for (std::size_t k = 0; k < H; ++k) {
                gur[k] += d * h_prev[k];
                dh_next[k] += d * ur[k];
            }
        }
    }
}

// Inverted dropout; an empty mask means identity.
std::vector<double> draw_mask(std::size_t n, double rate, std::mt19937_64* rng) {
    if (rate <= 0.0 || rng == nullptr) return {};
    std::vector<double> m(n);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double keep = 1.0 / (1.0 - rate);
    for (auto& v : m) v = u(*rng) < rate ? 0.0 : keep;
    return m;
}

void apply_mask(std::vector<double>& v, const std::vector<double>& m) {
    if (m.empty()) return;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] *= m[i];
}

}  // namespace

Autoencoder::Autoencoder() : params_(kParamCount, 0.0) {}

Autoencoder Autoencoder::initialized(std::uint64_t seed, double output_bias) {
    Autoencoder a;
    std::mt19937_64 rng(seed);
    for (const auto& s : {kEnc1, kEnc2, kDec1, kDec2}) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(s.input + s.hidden));
        std::uniform_real_distribution<double> u(-bound, bound);
        const std::size_t n_weights = 4 * s.hidden * (s.input + s.hidden);
        for (std::size_t k = 0; k < n_weights; ++k) a.params_[s.offset + k] = u(rng);
        double* b = a.params_.data() + s.offset + n_weights;
        for (std::size_t j = 0; j < s.hidden; ++j) b[s.hidden + j] = 1.0;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(kOuterWidth));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t k = 0; k < kOuterWidth; ++k) a.params_[kHeadOffset + k] = u(rng);
    a.params_[kHeadOffset + kOuterWidth] = output_bias;
    return a;
}

std::vector<ParamGroup> Autoencoder::groups() const {
    std::vector<ParamGroup> out;
    const std::pair<const char*, LstmShape> layers[] = {
        {"encoder1", kEnc1}, {"encoder2", kEnc2}, {"decoder1", kDec1}, {"decoder2", kDec2}};
    for (const auto& [name, s] : layers) {
        const std::size_t w = 4 * s.hidden * s.input, u = 4 * s.hidden * s.hidden;
        out.push_back({std::string(name) + ".W", s.offset, w});
        out.push_back({std::string(name) + ".U", s.offset + w, u});
        out.push_back({std::string(name) + ".b", s.offset + w + u, 4 * s.hidden});
    }
    out.push_back({"head.w", kHeadOffset, kOuterWidth});
    out.push_back({"head.b", kHeadOffset + kOuterWidth, 1});
    return out;
}

std::array<double, kBottleneck> Autoencoder::encode(const MosSequence& seq) const {
    if (seq.valid_len == 0 || seq.valid_len > kSeqLen) throw ValidationError("sequence valid_len out of range");
    const double* p = params_.data();
    LstmTrace e1, e2;
    lstm_forward(p, kEnc1, seq.values.data(), seq.valid_len, e1);
    lstm_forward(p, kEnc2, e1.h.data() + kOuterWidth, seq.valid_len, e2);
    std::array<double, kBottleneck> z{};
    std::copy_n(e2.h_at(seq.valid_len - 1, kBottleneck), kBottleneck, z.begin());
    return z;
}

Pattern Autoencoder::decode(const std::array<double, kBottleneck>& z) const {
    const double* p = params_.data();
    std::vector<double> repeated(kSeqLen * kBottleneck);
    for (std::size_t t = 0; t < kSeqLen; ++t) std::copy(z.begin(), z.end(), repeated.begin() + static_cast<std::ptrdiff_t>(t * kBottleneck));
    LstmTrace d1, d2;
    lstm_forward(p, kDec1, repeated.data(), kSeqLen, d1);
    lstm_forward(p, kDec2, d1.h.data() + kBottleneck, kSeqLen, d2);
    Pattern y{};
    const double* w = p + kHeadOffset;
    for (std::size_t t = 0; t < kSeqLen; ++t) {
        double a = w[kOuterWidth];
        const double* h = d2.h_at(t, kOuterWidth);
        for (std::size_t k = 0; k < kOuterWidth; ++k) a += w[k] * h[k];
        y[t] = std::max(0.0, a);
    }
    return y;
}

Pattern Autoencoder::reconstruct_raw(const MosSequence& seq) const { return decode(encode(seq)); }

Pattern Autoencoder::reconstruct(const MosSequence& seq) const {
    auto y = reconstruct_raw(seq);
    for (auto& v : y) v = std::clamp(v, 1.0, 5.0);
    return y;
}

double Autoencoder::sequence_pass(const MosSequence& seq, double scale, std::vector<double>* grad, double dropout,
                                  std::mt19937_64* rng, Pattern* out) const {
    const std::size_t T = seq.valid_len;
    if (T == 0 || T > kSeqLen) throw ValidationError("sequence valid_len out of range");
    const double* p = params_.data();

    LstmTrace e1, e2, d1, d2;
    lstm_forward(p, kEnc1, seq.values.data(), T, e1);
    std::vector<double> e1_out(e1.h.begin() + kOuterWidth, e1.h.end());
    const auto m1 = draw_mask(e1_out.size(), dropout, rng);
    apply_mask(e1_out, m1);

    lstm_forward(p, kEnc2, e1_out.data(), T, e2);
    std::vector<double> z(e2.h_at(T - 1, kBottleneck), e2.h_at(T - 1, kBottleneck) + kBottleneck);
    const auto m2 = draw_mask(z.size(), dropout, rng);
    apply_mask(z, m2);

    std::vector<double> repeated(kSeqLen * kBottleneck);
    for (std::size_t t = 0; t < kSeqLen; ++t) std::copy(z.begin(), z.end(), repeated.begin() + static_cast<std::ptrdiff_t>(t * kBottleneck));
    lstm_forward(p, kDec1, repeated.data(), kSeqLen, d1);
    std::vector<double> d1_out(d1.h.begin() + kBottleneck, d1.h.end());
    const auto m3 = draw_mask(d1_out.size(), dropout, rng);
    apply_mask(d1_out, m3);

    lstm_forward(p, kDec2, d1_out.data(), kSeqLen, d2);
    std::vector<double> d2_out(d2.h.begin() + kOuterWidth, d2.h.end());
    const auto m4 = draw_mask(d2_out.size(), dropout, rng);
    apply_mask(d2_out, m4);

    const double* w = p + kHeadOffset;
    Pattern pre{}, y{};
    double sse = 0.0;
    for (std::size_t t = 0; t < kSeqLen; ++t) {
        double a = w[kOuterWidth];
        for (std::size_t k = 0; k < kOuterWidth; ++k) a += w[k] * d2_out[t * kOuterWidth + k];
        pre[t] = a;
        y[t] = std::max(0.0, a);
        if (t < T) sse += (y[t] - seq.values[t]) * (y[t] - seq.values[t]);
    }
    if (out != nullptr) *out = y;
    if (grad == nullptr) return sse;

    // Backward. Padded steps carry no loss.
    double* g = grad->data();
    std::vector<double> d_d2(kSeqLen * kOuterWidth, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        const double da = pre[t] > 0.0 ? 2.0 * (y[t] - seq.values[t]) * scale : 0.0;
        if (da == 0.0) continue;
        g[kHeadOffset + kOuterWidth] += da;
        for (std::size_t k = 0; k < kOuterWidth; ++k) {
            g[kHeadOffset + k] += da * d2_out[t * kOuterWidth + k];
            d_d2[t * kOuterWidth + k] = da * w[k];
        }
    }
    apply_mask(d_d2, m4);

    std::vector<double> d_d1(kSeqLen * kBottleneck);
    lstm_backward(p, kDec2, d2, d_d2.data(), g, d_d1.data());
    apply_mask(d_d1, m3);

    std::vector<double> d_rep(kSeqLen * kBottleneck);
    lstm_backward(p, kDec1, d1, d_d1.data(), g, d_rep.data());
    std::vector<double> dz(kBottleneck, 0.0);
    for (std::size_t t = 0; t < kSeqLen; ++t) {
        for (std::size_t k = 0; k < kBottleneck; ++k) dz[k] += d_rep[t * kBottleneck + k];
    }
    apply_mask(dz, m2);

    std::vector<double> d_e2(T * kBottleneck, 0.0);
    std::copy(dz.begin(), dz.end(), d_e2.begin() + static_cast<std::ptrdiff_t>((T - 1) * kBottleneck));
    std::vector<double> d_e1(T * kOuterWidth);
    lstm_backward(p, kEnc2, e2, d_e2.data(), g, d_e1.data());
    apply_mask(d_e1, m1);

    std::vector<double> d_x(T);
    lstm_backward(p, kEnc1, e1, d_e1.data(), g, d_x.data());
    return sse;
}

namespace {

std::size_t valid_count(std::span<const MosSequence> batch) {
    std::size_t n = 0;
    for (const auto& s : batch) n += s.valid_len;
    if (n == 0) throw ValidationError("empty batch");
    return n;
}

}  // namespace

double Autoencoder::loss(std::span<const MosSequence> batch) const {
    const auto n = static_cast<double>(valid_count(batch));
    double sse = 0.0;
    for (const auto& s : batch) sse += sequence_pass(s, 0.0, nullptr, 0.0, nullptr, nullptr);
    return sse / n;
}

double Autoencoder::loss_and_gradient(std::span<const MosSequence> batch, std::vector<double>& grad, double dropout,
                                      std::mt19937_64* rng) const {
    const auto n = static_cast<double>(valid_count(batch));
    grad.assign(params_.size(), 0.0);
    double sse = 0.0;
    for (const auto& s : batch) sse += sequence_pass(s, 1.0 / n, &grad, dropout, rng, nullptr);
    return sse / n;
}

void Adam::update(std::vector<double>& params, const std::vector<double>& grad, double learning_rate) {
    if (m.size() != params.size()) {
        m.assign(params.size(), 0.0);
        v.assign(params.size(), 0.0);
        step = 0;
    }
    ++step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
        v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
        params[k] -= learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + epsilon);
    }
}

AutoencoderModel train_autoencoder(std::span<const MosSequence> train, std::span<const MosSequence> validation,
                                   const Hyper& hyper, std::uint64_t seed) {
    if (train.empty() || validation.empty()) throw ValidationError("train and validation sets must be non-empty");
    if (hyper.epochs == 0 || hyper.batch_size == 0) throw ValidationError("epochs and batch size must be positive");
    if (!(hyper.learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
    if (!(hyper.dropout >= 0.0 && hyper.dropout < 1.0)) throw ValidationError("dropout must lie in [0,1)");

    double target_sum = 0.0;
    std::size_t target_n = 0;
    for (const auto& s : train) {
        for (std::size_t t = 0; t < s.valid_len; ++t) target_sum += s.values[t];
        target_n += s.valid_len;
    }

    AutoencoderModel model;
    model.hyper = hyper;
    model.seed = seed;
    model.net = Autoencoder::initialized(session_seed(seed, 0), target_sum / static_cast<double>(target_n));
    for (const auto& s : train) model.train_ids.push_back(s.session_id);
    for (const auto& s : validation) model.validation_ids.push_back(s.session_id);
    model.initial_val_mse = model.net.loss(validation);

    std::mt19937_64 shuffle_rng(session_seed(seed, 1));
    std::mt19937_64 dropout_rng(session_seed(seed, 2));
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<MosSequence> batch;
    std::vector<double> grad;
    Adam adam;
    std::size_t bad_epochs = 0;
    for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
            batch.clear();
            for (std::size_t k = start; k < std::min(order.size(), start + hyper.batch_size); ++k) batch.push_back(train[order[k]]);
            model.net.loss_and_gradient(batch, grad, hyper.dropout, &dropout_rng);
            adam.update(model.net.params(), grad, hyper.learning_rate);
        }
        const double train_mse = model.net.loss(train);
        const double val_mse = model.net.loss(validation);
        model.curve.push_back({epoch, train_mse, val_mse});
        if (!std::isfinite(val_mse) || val_mse > 10.0 * model.initial_val_mse) {
            if (++bad_epochs >= 5) {
                throw DivergenceError("autoencoder diverged at epoch " + std::to_string(epoch) + ": validation MSE " +
                                      text::format_fixed(val_mse) + " vs initial " +
                                      text::format_fixed(model.initial_val_mse));
            }
        } else {
            bad_epochs = 0;
        }
    }
    return model;
}

GridResult grid_search(std::span<const MosSequence> train, std::span<const MosSequence> validation,
                       const HyperGrid& grid, std::uint64_t seed) {
    GridResult result;
    bool have_best = false;
    double best_val = std::numeric_limits<double>::infinity();
    for (std::size_t epochs : grid.epochs) {
        for (std::size_t batch : grid.batch_sizes) {
            for (double lr : grid.learning_rates) {
                for (double dropout : grid.dropouts) {
                    const Hyper h{epochs, batch, lr, dropout};
                    GridCell cell{h, std::numeric_limits<double>::infinity(), false};
                    try {
                        auto m = train_autoencoder(train, validation, h, seed);
                        cell.val_mse = m.curve.back().val_mse;
                        if (cell.val_mse < best_val) {
                            best_val = cell.val_mse;
                            result.best = std::move(m);
                            have_best = true;
                        }
                    } catch (const DivergenceError&) {
                        cell.diverged = true;
                    }
                    result.cells.push_back(cell);
                }
            }
        }
    }
    if (!have_best) throw DivergenceError("every hyperparameter cell diverged");
    return result;
}

TypicalPattern typical_pattern(const Autoencoder& net, std::span<const MosSequence> seqs) {
    if (seqs.empty()) throw ValidationError("typical_pattern needs at least one sequence");
    TypicalPattern out;
    for (const auto& s : seqs) {
        const auto r = net.reconstruct(s);
        for (std::size_t t = 0; t < kSeqLen; ++t) out.values[t] += r[t];
    }
    for (auto& v : out.values) v /= static_cast<double>(seqs.size());
    out.n_sessions_aggregated = seqs.size();
    return out;
}

Pattern plain_average(std::span<const MosSequence> seqs) {
    if (seqs.empty()) throw ValidationError("plain_average needs at least one sequence");
    Pattern out{};
    for (const auto& s : seqs) {
        for (std::size_t t = 0; t < kSeqLen; ++t) out[t] += s.values[t];
    }
    for (auto& v : out) v /= static_cast<double>(seqs.size());
    return out;
}

GradCheckResult gradient_check(const LossFn& f, std::span<const double> params, std::span<const std::size_t> indices,
                               double epsilon) {
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
    std::vector<double> grad;
    f(params, &grad);
    std::vector<double> probe(params.begin(), params.end());
    GradCheckResult out;
    for (std::size_t k : indices) {
        if (k >= probe.size()) throw ValidationError("gradient_check index out of range");
        const double saved = probe[k];
        probe[k] = saved + epsilon;
        const double up = f(probe, nullptr);
        probe[k] = saved - epsilon;
        const double down = f(probe, nullptr);
        probe[k] = saved;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double analytic = grad[k];
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
        out.max_relative_error = std::max(out.max_relative_error, std::abs(analytic - numeric) / denom);
        ++out.n_checked;
    }
    return out;
}

GradCheckResult gradient_check(const Autoencoder& net, std::span<const MosSequence> batch, double epsilon,
                               std::size_t min_weights, std::uint64_t seed) {
    auto groups = net.groups();
    // Small groups first so their shortfall is carried into larger ones.
    std::stable_sort(groups.begin(), groups.end(), [](const ParamGroup& a, const ParamGroup& b) { return a.size < b.size; });
    const std::size_t per_group = (min_weights + groups.size() - 1) / groups.size();
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> indices;
    std::size_t shortfall = 0;
    for (const auto& g : groups) {
        std::vector<std::size_t> all(g.size);
        std::iota(all.begin(), all.end(), g.offset);
        std::shuffle(all.begin(), all.end(), rng);
        const std::size_t take = std::min(all.size(), per_group + shortfall);
        shortfall = per_group + shortfall - take;
        indices.insert(indices.end(), all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take));
    }
    Autoencoder work = net;
    LossFn f = [&](std::span<const double> p, std::vector<double>* grad) {
        std::copy(p.begin(), p.end(), work.params().begin());
        if (grad != nullptr) return work.loss_and_gradient(batch, *grad);
        return work.loss(batch);
    };
    return gradient_check(f, net.params(), indices, epsilon);
}

namespace {

nlohmann::json curve_json(const std::vector<CurvePoint>& curve) {
    auto arr = nlohmann::json::array();
    for (const auto& c : curve) arr.push_back({{"epoch", c.epoch}, {"train_mse", c.train_mse}, {"val_mse", c.val_mse}});
    return arr;
}

}  // namespace

void save_model(const AutoencoderModel& model, const std::filesystem::path& path) {
    nlohmann::json j;
    j["format"] = "vdt-autoencoder";
    j["version"] = 1;
    j["architecture"] = {{"sequence_length", kSeqLen},
                         {"encoder", {kOuterWidth, kBottleneck}},
                         {"decoder", {kBottleneck, kOuterWidth}},
                         {"head", "affine+relu"}};
    j["hyper"] = {{"epochs", model.hyper.epochs},
                  {"batch_size", model.hyper.batch_size},
                  {"learning_rate", model.hyper.learning_rate},
                  {"dropout", model.hyper.dropout}};
    j["seed"] = model.seed;
    j["split_seed"] = model.split_seed;
    j["initial_val_mse"] = model.initial_val_mse;
    j["curve"] = curve_json(model.curve);
    j["split"] = {{"train", model.train_ids}, {"validation", model.validation_ids}, {"test", model.test_ids}};
    j["weights"] = model.net.params();
    j["weights_sha256"] = sha256_hex(nlohmann::json(model.net.params()).dump());

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + path.string());
    out << j.dump(1) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

AutoencoderModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("missing model file: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed model file " + path.string() + ": " + e.what());
    }
    try {
        if (j.at("format") != "vdt-autoencoder" || j.at("version") != 1) {
            throw ValidationError("unsupported model format in " + path.string());
        }
        AutoencoderModel m;
        const auto weights = j.at("weights").get<std::vector<double>>();
        if (weights.size() != m.net.params().size()) throw ValidationError("weight count mismatch in " + path.string());
        if (sha256_hex(nlohmann::json(weights).dump()) != j.at("weights_sha256").get<std::string>()) {
            throw ValidationError("weight hash mismatch in " + path.string());
        }
        m.net.params() = weights;
        const auto& h = j.at("hyper");
        m.hyper = {h.at("epochs").get<std::size_t>(), h.at("batch_size").get<std::size_t>(),
                   h.at("learning_rate").get<double>(), h.at("dropout").get<double>()};
        m.seed = j.at("seed").get<std::uint64_t>();
        m.split_seed = j.at("split_seed").get<std::uint64_t>();
        m.initial_val_mse = j.at("initial_val_mse").get<double>();
        for (const auto& c : j.at("curve")) {
            m.curve.push_back({c.at("epoch").get<std::size_t>(), c.at("train_mse").get<double>(), c.at("val_mse").get<double>()});
        }
        m.train_ids = j.at("split").at("train").get<std::vector<std::string>>();
        m.validation_ids = j.at("split").at("validation").get<std::vector<std::string>>();
        m.test_ids = j.at("split").at("test").get<std::vector<std::string>>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed model file " + path.string() + ": " + e.what());
    }
}

void write_pattern_csv(const TypicalPattern& p, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + path.string());
    for (std::size_t t = 0; t < kSeqLen; ++t) out << t << ',' << text::format_exact(p.values[t]) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

TypicalPattern read_pattern_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("missing pattern file: " + path.string());
    TypicalPattern p;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        const auto cells = text::split(line, ',');
        const auto idx = cells.size() == 2 ? text::parse_int(cells[0]) : std::nullopt;
        const auto v = cells.size() == 2 ? text::parse_double(cells[1]) : std::nullopt;
        if (!idx || !v || *idx != static_cast<long long>(n) || n >= kSeqLen) {
            throw ValidationError("malformed pattern file " + path.string() + " at line " + std::to_string(n + 1));
        }
        p.values[n++] = *v;
    }
    if (n != kSeqLen) throw ValidationError("pattern file " + path.string() + " must have 15 rows");
    return p;
}

}  // namespace vdt
