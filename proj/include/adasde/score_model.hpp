#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "adasde/rng.hpp"
#include "adasde/score_field.hpp"
#include "adasde/types.hpp"

namespace adasde {

/// Denoiser preconditioning constants (sigma_data is the data std).
inline double c_skip(double t, double sigma_data) {
    const double sd2 = sigma_data * sigma_data;
    return sd2 / (t * t + sd2);
}
inline double c_out(double t, double sigma_data) {
    const double sd2 = sigma_data * sigma_data;
    return t * sigma_data / std::sqrt(t * t + sd2);
}
inline double c_in(double t, double sigma_data) {
    const double sd2 = sigma_data * sigma_data;
    return 1.0 / std::sqrt(t * t + sd2);
}

inline constexpr int kFourierFeatures = 16;  // 8 frequencies x (sin, cos) of log t
inline constexpr int kMlpInputDim = 2 + kFourierFeatures;
inline constexpr int kMlpOutputDim = 2;

/// Weights and biases of the fixed feedforward architecture:
/// input (2D point scaled by c_in + time embedding) -> H x n_hidden -> 2D.
struct MlpParams {
    std::vector<Eigen::MatrixXd> weights;  // [H x in], (n_hidden-1) x [H x H], [2 x H]
    std::vector<Eigen::VectorXd> biases;

    static MlpParams init(int hidden_width, int n_hidden, std::uint64_t seed);
    static MlpParams zeros_like(const MlpParams& other);

    int hidden_width() const { return static_cast<int>(weights.front().rows()); }
    int n_hidden() const { return static_cast<int>(weights.size()) - 1; }
    std::size_t param_count() const;
    double get_flat(std::size_t i) const;
    void set_flat(std::size_t i, double v);
    bool all_finite() const;
};

bool same_shape(const MlpParams& a, const MlpParams& b);
bool bitwise_equal(const MlpParams& a, const MlpParams& b);

struct TrainConfig {
    int hidden_width = 128;
    int n_layers = 3;  // hidden layers
    double learning_rate = 1e-3;
    int batch_size = 512;
    int n_iters = 20000;
    double t_log_mean = std::log(0.25);  // log-normal over sigma
    double t_log_std = 1.2;
    double sigma_min = 0.002;
    double sigma_max = 80.0;
    double sigma_data = 0.5;
    std::uint64_t seed = 0;
};

/// Time embedding: Fourier features of log(t) at octave-spaced frequencies.
void time_embedding(double t, double* out16);

/// Denoised estimate D(x,t) = c_skip x + c_out net(c_in x, emb(t)).
Vec2 mlp_denoise(const MlpParams& params, const Vec2& x, double t, double sigma_data);

/// Denoising score-matching loss on one batch plus its exact reverse-mode
/// gradient. Noise levels are drawn per example from the clipped log-normal,
/// noise via Box-Muller; both keyed off `rng` by example index, so probing
/// the same stream twice reproduces the same draws.
double dsm_loss_and_grad(const MlpParams& params, const PointCloud& batch, RngStream rng,
                         const TrainConfig& cfg, MlpParams& grad_out);

/// Adam-trained denoiser; deterministic given cfg.seed. The per-iteration
/// loss curve goes to `loss_csv` when non-null ("iter,loss" rows).
MlpParams train(const TrainConfig& cfg, const PointCloud& data, std::ostream* loss_csv = nullptr);

/// Learned drift/score adapter; immutable, thread-safe for inference.
class MlpScoreField final : public ScoreField {
public:
    MlpScoreField(MlpParams params, double sigma_data);

    Vec2 score(const Vec2& x, double t) const override;
    void score_batch(std::span<const Vec2> xs, double t, std::span<Vec2> out) const override;

    const MlpParams& params() const { return params_; }
    double sigma_data() const { return sigma_data_; }

private:
    MlpParams params_;
    double sigma_data_;
};

/// Text checkpoint: architecture header plus one parameter value per line.
void save_checkpoint(const std::filesystem::path& path, const MlpParams& params,
                     double sigma_data);
MlpScoreField load_checkpoint(const std::filesystem::path& path);

}  // namespace adasde
