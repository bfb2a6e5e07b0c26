#include "adasde/score_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "adasde/io.hpp"

namespace adasde {

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Eigen::MatrixXd silu(const Eigen::MatrixXd& z) {
    return z.unaryExpr([](double v) { return v * sigmoid(v); });
}

Eigen::MatrixXd silu_grad(const Eigen::MatrixXd& z) {
    return z.unaryExpr([](double v) {
        const double s = sigmoid(v);
        return s * (1.0 + v * (1.0 - s));
    });
}

struct Workspace {
    std::vector<Eigen::MatrixXd> zs;   // pre-activations per hidden layer
    std::vector<Eigen::MatrixXd> as;   // activations per hidden layer
};

/// Raw network output for a batch of assembled inputs (B x kMlpInputDim).
Eigen::MatrixXd forward_net(const MlpParams& p, const Eigen::MatrixXd& input, Workspace* ws) {
    const int n_hidden = p.n_hidden();
    Eigen::MatrixXd a = input;
    if (ws) {
        ws->zs.resize(n_hidden);
        ws->as.resize(n_hidden);
    }
    for (int l = 0; l < n_hidden; ++l) {
        Eigen::MatrixXd z = a * p.weights[l].transpose();
        z.rowwise() += p.biases[l].transpose();
        a = silu(z);
        if (ws) {
            ws->zs[l] = std::move(z);
            ws->as[l] = a;
        }
    }
    Eigen::MatrixXd out = a * p.weights[n_hidden].transpose();
    out.rowwise() += p.biases[n_hidden].transpose();
    return out;
}

/// Reverse pass: d_out is dLoss/d(net output); accumulates into grad.
void backward_net(const MlpParams& p, const Eigen::MatrixXd& input, const Workspace& ws,
                  const Eigen::MatrixXd& d_out, MlpParams& grad) {
    const int n_hidden = p.n_hidden();
    grad.weights[n_hidden] += d_out.transpose() * ws.as[n_hidden - 1];
    grad.biases[n_hidden] += d_out.colwise().sum();

    Eigen::MatrixXd d_a = d_out * p.weights[n_hidden];
    for (int l = n_hidden - 1; l >= 0; --l) {
        const Eigen::MatrixXd d_z = d_a.cwiseProduct(silu_grad(ws.zs[l]));
        const Eigen::MatrixXd& below = l == 0 ? input : ws.as[l - 1];
        grad.weights[l] += d_z.transpose() * below;
        grad.biases[l] += d_z.colwise().sum();
        if (l > 0) d_a = d_z * p.weights[l];
    }
}

void assemble_row(Eigen::MatrixXd& input, Eigen::Index row, const Vec2& x, double t,
                  double sigma_data) {
    const double ci = c_in(t, sigma_data);
    input(row, 0) = ci * x.x;
    input(row, 1) = ci * x.y;
    double emb[kFourierFeatures];
    time_embedding(t, emb);
    for (int j = 0; j < kFourierFeatures; ++j) input(row, 2 + j) = emb[j];
}

}  // namespace

void time_embedding(double t, double* out16) {
    // log t mapped to [0, 1] over the training sigma range, then a low-order
    // Fourier basis; higher harmonics would decorrelate neighboring sigmas.
    const double lo = std::log(0.002), hi = std::log(80.0);
    const double u = (std::log(t) - lo) / (hi - lo);
    for (int j = 0; j < kFourierFeatures / 2; ++j) {
        const double f = std::numbers::pi * (j + 1);
        out16[2 * j] = std::sin(f * u);
        out16[2 * j + 1] = std::cos(f * u);
    }
}

MlpParams MlpParams::init(int hidden_width, int n_hidden, std::uint64_t seed) {
    if (hidden_width < 1 || n_hidden < 1)
        throw std::invalid_argument("mlp: hidden_width and n_layers must be >= 1");
    const RngStream stream = fork(RngStream(seed), StreamId::TrainInit);
    MlpParams p;
    auto make_layer = [&](int out_dim, int in_dim, std::uint64_t layer) {
        const RngStream ls = stream.fork(layer);
        Eigen::MatrixXd w(out_dim, in_dim);
        const double scale = std::sqrt(2.0 / in_dim);
        std::uint64_t k = 0;
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = scale * ls.normal(k++);
        p.weights.push_back(std::move(w));
        p.biases.push_back(Eigen::VectorXd::Zero(out_dim));
    };
    make_layer(hidden_width, kMlpInputDim, 0);
    for (int l = 1; l < n_hidden; ++l) make_layer(hidden_width, hidden_width, l);
    make_layer(kMlpOutputDim, hidden_width, n_hidden);
    return p;
}

MlpParams MlpParams::zeros_like(const MlpParams& other) {
    MlpParams p;
    for (const auto& w : other.weights) p.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    for (const auto& b : other.biases) p.biases.push_back(Eigen::VectorXd::Zero(b.size()));
    return p;
}

std::size_t MlpParams::param_count() const {
    std::size_t n = 0;
    for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
    for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
    return n;
}

namespace {
double* flat_ptr(MlpParams& p, std::size_t i) {
    for (auto& w : p.weights) {
        if (i < static_cast<std::size_t>(w.size())) return w.data() + i;
        i -= static_cast<std::size_t>(w.size());
    }
    for (auto& b : p.biases) {
        if (i < static_cast<std::size_t>(b.size())) return b.data() + i;
        i -= static_cast<std::size_t>(b.size());
    }
    throw std::out_of_range("mlp: flat parameter index");
}
}  // namespace

double MlpParams::get_flat(std::size_t i) const {
    return *flat_ptr(const_cast<MlpParams&>(*this), i);
}

void MlpParams::set_flat(std::size_t i, double v) { *flat_ptr(*this, i) = v; }

bool MlpParams::all_finite() const {
    for (const auto& w : weights)
        if (!w.allFinite()) return false;
    for (const auto& b : biases)
        if (!b.allFinite()) return false;
    return true;
}

bool same_shape(const MlpParams& a, const MlpParams& b) {
    if (a.weights.size() != b.weights.size() || a.biases.size() != b.biases.size()) return false;
    for (std::size_t i = 0; i < a.weights.size(); ++i)
        if (a.weights[i].rows() != b.weights[i].rows() || a.weights[i].cols() != b.weights[i].cols())
            return false;
    for (std::size_t i = 0; i < a.biases.size(); ++i)
        if (a.biases[i].size() != b.biases[i].size()) return false;
    return true;
}

bool bitwise_equal(const MlpParams& a, const MlpParams& b) {
    if (!same_shape(a, b)) return false;
    for (std::size_t i = 0; i < a.weights.size(); ++i)
        if (std::memcmp(a.weights[i].data(), b.weights[i].data(),
                        sizeof(double) * a.weights[i].size()) != 0)
            return false;
    for (std::size_t i = 0; i < a.biases.size(); ++i)
        if (std::memcmp(a.biases[i].data(), b.biases[i].data(),
                        sizeof(double) * a.biases[i].size()) != 0)
            return false;
    return true;
}

Vec2 mlp_denoise(const MlpParams& params, const Vec2& x, double t, double sigma_data) {
    Eigen::MatrixXd input(1, kMlpInputDim);
    assemble_row(input, 0, x, t, sigma_data);
    const Eigen::MatrixXd out = forward_net(params, input, nullptr);
    const double cs = c_skip(t, sigma_data);
    const double co = c_out(t, sigma_data);
    return {cs * x.x + co * out(0, 0), cs * x.y + co * out(0, 1)};
}

double dsm_loss_and_grad(const MlpParams& params, const PointCloud& batch, RngStream rng,
                         const TrainConfig& cfg, MlpParams& grad_out) {
    if (batch.empty()) throw std::invalid_argument("dsm: batch must be nonempty");
    const auto B = static_cast<Eigen::Index>(batch.size());

    Eigen::MatrixXd input(B, kMlpInputDim);
    Eigen::VectorXd ts(B), lam(B), couts(B);
    Eigen::MatrixXd xt(B, 2), x0(B, 2);
    for (Eigen::Index i = 0; i < B; ++i) {
        const RngStream pt = rng.fork(static_cast<std::uint64_t>(i));
        const double z = pt.normal(0);
        double t = std::exp(cfg.t_log_mean + cfg.t_log_std * z);
        t = std::clamp(t, cfg.sigma_min, cfg.sigma_max);
        const auto eps = pt.normal2(1);
        const Vec2 p0 = batch.points[static_cast<std::size_t>(i)];
        const Vec2 pt_noised{p0.x + t * eps[0], p0.y + t * eps[1]};
        ts(i) = t;
        x0(i, 0) = p0.x;
        x0(i, 1) = p0.y;
        xt(i, 0) = pt_noised.x;
        xt(i, 1) = pt_noised.y;
        const double sd = cfg.sigma_data;
        lam(i) = (t * t + sd * sd) / (t * sd * t * sd);
        couts(i) = c_out(t, sd);
        assemble_row(input, i, pt_noised, t, sd);
    }

    Workspace ws;
    const Eigen::MatrixXd out = forward_net(params, input, &ws);

    Eigen::MatrixXd resid(B, 2);  // D - x0
    double loss = 0.0;
    for (Eigen::Index i = 0; i < B; ++i) {
        const double cs = c_skip(ts(i), cfg.sigma_data);
        for (int d = 0; d < 2; ++d)
            resid(i, d) = cs * xt(i, d) + couts(i) * out(i, d) - x0(i, d);
        loss += lam(i) * (resid(i, 0) * resid(i, 0) + resid(i, 1) * resid(i, 1));
    }
    loss /= static_cast<double>(B);

    Eigen::MatrixXd d_out(B, 2);
    for (Eigen::Index i = 0; i < B; ++i) {
        const double w = 2.0 * lam(i) * couts(i) / static_cast<double>(B);
        d_out(i, 0) = w * resid(i, 0);
        d_out(i, 1) = w * resid(i, 1);
    }

    grad_out = MlpParams::zeros_like(params);
    backward_net(params, input, ws, d_out, grad_out);
    return loss;
}

MlpParams train(const TrainConfig& cfg, const PointCloud& data, std::ostream* loss_csv) {
    if (data.empty()) throw std::invalid_argument("train: data must be nonempty");
    if (cfg.batch_size < 1 || cfg.n_iters < 0 || !(cfg.learning_rate > 0.0))
        throw std::invalid_argument("train: bad optimizer config");

    MlpParams params = MlpParams::init(cfg.hidden_width, cfg.n_layers, cfg.seed);
    MlpParams m = MlpParams::zeros_like(params);
    MlpParams v = MlpParams::zeros_like(params);
    MlpParams grad = MlpParams::zeros_like(params);

    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    const RngStream root = RngStream(cfg.seed);
    const RngStream batches = fork(root, StreamId::TrainBatch);

    if (loss_csv) *loss_csv << "iter,loss\n";

    PointCloud batch;
    batch.points.resize(static_cast<std::size_t>(cfg.batch_size));
    for (int iter = 0; iter < cfg.n_iters; ++iter) {
        const RngStream it = batches.fork(static_cast<std::uint64_t>(iter));
        const RngStream pick = it.fork(0);
        const RngStream noise = it.fork(1);
        for (int j = 0; j < cfg.batch_size; ++j) {
            const auto k = static_cast<std::size_t>(pick.uniform(static_cast<std::uint64_t>(j)) *
                                                    static_cast<double>(data.size()));
            batch.points[static_cast<std::size_t>(j)] = data.points[std::min(k, data.size() - 1)];
        }

        const double loss = dsm_loss_and_grad(params, batch, noise, cfg, grad);
        if (!std::isfinite(loss))
            throw std::runtime_error("train: diverged (non-finite loss) at iter " +
                                     std::to_string(iter));
        if (loss_csv) *loss_csv << iter << ',' << format_double(loss) << '\n';

        const double bc1 = 1.0 - std::pow(beta1, iter + 1);
        const double bc2 = 1.0 - std::pow(beta2, iter + 1);
        for (std::size_t l = 0; l < params.weights.size(); ++l) {
            m.weights[l] = beta1 * m.weights[l] + (1.0 - beta1) * grad.weights[l];
            v.weights[l] = beta2 * v.weights[l].array().matrix() +
                           (1.0 - beta2) * grad.weights[l].array().square().matrix();
            params.weights[l].array() -=
                cfg.learning_rate * (m.weights[l].array() / bc1) /
                ((v.weights[l].array() / bc2).sqrt() + adam_eps);

            m.biases[l] = beta1 * m.biases[l] + (1.0 - beta1) * grad.biases[l];
            v.biases[l] = beta2 * v.biases[l].array().matrix() +
                          (1.0 - beta2) * grad.biases[l].array().square().matrix();
            params.biases[l].array() -=
                cfg.learning_rate * (m.biases[l].array() / bc1) /
                ((v.biases[l].array() / bc2).sqrt() + adam_eps);
        }
    }
    return params;
}

MlpScoreField::MlpScoreField(MlpParams params, double sigma_data)
    : params_(std::move(params)), sigma_data_(sigma_data) {
    if (!(sigma_data_ > 0.0)) throw std::invalid_argument("mlp field: sigma_data must be > 0");
    if (!params_.all_finite()) throw std::invalid_argument("mlp field: non-finite parameters");
}

Vec2 MlpScoreField::score(const Vec2& x, double t) const {
    const Vec2 d = mlp_denoise(params_, x, t, sigma_data_);
    return {(d.x - x.x) / (t * t), (d.y - x.y) / (t * t)};
}

void MlpScoreField::score_batch(std::span<const Vec2> xs, double t, std::span<Vec2> out) const {
    const auto B = static_cast<Eigen::Index>(xs.size());
    if (B == 0) return;
    Eigen::MatrixXd input(B, kMlpInputDim);
    const double ci = c_in(t, sigma_data_);
    double emb[kFourierFeatures];
    time_embedding(t, emb);
    for (Eigen::Index i = 0; i < B; ++i) {
        input(i, 0) = ci * xs[static_cast<std::size_t>(i)].x;
        input(i, 1) = ci * xs[static_cast<std::size_t>(i)].y;
        for (int j = 0; j < kFourierFeatures; ++j) input(i, 2 + j) = emb[j];
    }
    const Eigen::MatrixXd raw = forward_net(params_, input, nullptr);
    const double cs = c_skip(t, sigma_data_);
    const double co = c_out(t, sigma_data_);
    const double inv_t2 = 1.0 / (t * t);
    for (Eigen::Index i = 0; i < B; ++i) {
        const Vec2& x = xs[static_cast<std::size_t>(i)];
        const double dx = cs * x.x + co * raw(i, 0);
        const double dy = cs * x.y + co * raw(i, 1);
        out[static_cast<std::size_t>(i)] = {(dx - x.x) * inv_t2, (dy - x.y) * inv_t2};
    }
}

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params,
                     double sigma_data) {
    std::ostringstream out;
    out << "adasde-mlp v1\n";
    out << "hidden " << params.hidden_width() << '\n';
    out << "layers " << params.n_hidden() << '\n';
    out << "fourier " << kFourierFeatures << '\n';
    out << "sigma_data " << format_double(sigma_data) << '\n';
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        const auto& w = params.weights[l];
        out << "w " << l << ' ' << w.rows() << ' ' << w.cols() << '\n';
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) out << format_double(w(r, c)) << '\n';
        const auto& b = params.biases[l];
        out << "b " << l << ' ' << b.size() << '\n';
        for (Eigen::Index r = 0; r < b.size(); ++r) out << format_double(b(r)) << '\n';
    }
    write_text_file(path, out.str());
}

MlpScoreField load_checkpoint(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    auto next = [&]() {
        if (!std::getline(in, line)) throw std::runtime_error("checkpoint: truncated file");
        return line;
    };
    if (next() != "adasde-mlp v1") throw std::runtime_error("checkpoint: bad magic");
    int hidden = 0, layers = 0, fourier = 0;
    double sigma_data = 0.0;
    if (std::sscanf(next().c_str(), "hidden %d", &hidden) != 1 ||
        std::sscanf(next().c_str(), "layers %d", &layers) != 1 ||
        std::sscanf(next().c_str(), "fourier %d", &fourier) != 1)
        throw std::runtime_error("checkpoint: bad header");
    {
        const std::string s = next();
        if (s.rfind("sigma_data ", 0) != 0) throw std::runtime_error("checkpoint: bad header");
        sigma_data = std::strtod(s.c_str() + 11, nullptr);
    }
    if (fourier != kFourierFeatures)
        throw std::runtime_error("checkpoint: incompatible time embedding width");

    MlpParams p;
    for (int l = 0; l <= layers; ++l) {
        int idx = 0;
        long rows = 0, cols = 0, blen = 0;
        if (std::sscanf(next().c_str(), "w %d %ld %ld", &idx, &rows, &cols) != 3 || idx != l)
            throw std::runtime_error("checkpoint: bad weight header");
        Eigen::MatrixXd w(rows, cols);
        for (long r = 0; r < rows; ++r)
            for (long c = 0; c < cols; ++c) w(r, c) = std::strtod(next().c_str(), nullptr);
        if (std::sscanf(next().c_str(), "b %d %ld", &idx, &blen) != 2 || idx != l || blen != rows)
            throw std::runtime_error("checkpoint: bad bias header");
        Eigen::VectorXd b(blen);
        for (long r = 0; r < blen; ++r) b(r) = std::strtod(next().c_str(), nullptr);
        p.weights.push_back(std::move(w));
        p.biases.push_back(std::move(b));
    }
    if (p.hidden_width() != hidden)
        throw std::runtime_error("checkpoint: hidden width mismatch");
    return {std::move(p), sigma_data};
}

}  // namespace adasde
