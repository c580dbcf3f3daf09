// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright 2026 The uqd Authors

#ifndef UQD_ENCODER_HPP
#define UQD_ENCODER_HPP

#include <uqd/core.hpp>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace uqd {

enum class Architecture { mlp, recurrent };
enum class Objective { mse, triplet };
// Triplet margin as latent_dim * d_min (scaled) or d_min (plain).
enum class MarginMode { scaled, plain };

std::string to_string(Architecture a);
std::string to_string(Objective o);
std::string to_string(MarginMode m);
Architecture architecture_from_string(const std::string& s);
MarginMode margin_mode_from_string(const std::string& s);

struct EncoderShape {
    std::size_t steps = 50;
    std::size_t dims = 5;
    std::size_t hidden = 64;
    std::size_t latent = 10;
    Architecture architecture = Architecture::mlp;

    std::size_t input_size() const { return steps * dims; }
    bool operator==(const EncoderShape&) const = default;
};

/// Trajectory auto-encoder. The latent code is the learned feature.
///
/// MLP:       input -> tanh(hidden) -> latent -> tanh(hidden) -> input
/// Recurrent: tanh RNN over the steps, latent from the last hidden state;
///            the decoder is a tanh RNN fed the latent code at every step.
///
/// All weights live in one flat parameter vector, encoder block first, so
/// gradients and optimizer state are plain vectors too.
class EncoderModel {
public:
    EncoderModel(EncoderShape shape, RngStream& rng);
    EncoderModel(EncoderShape shape, Vector params);

    const EncoderShape& shape() const { return shape_; }
    std::size_t param_count() const { return static_cast<std::size_t>(params_.size()); }
    std::size_t encoder_param_count() const { return encoder_params_; }
    const Vector& params() const { return params_; }
    Vector& params() { return params_; }

    Vector encode(const StateTrajectory& trajectory) const;
    // Rows of `inputs` are flattened (time-major) trajectories.
    Matrix encode_batch(const Matrix& inputs) const;
    Matrix reconstruct_batch(const Matrix& inputs) const;

    // Mean squared reconstruction error over every entry; adds d/dparams to *grad when given.
    double reconstruction_loss(const Matrix& inputs, Vector* grad = nullptr) const;

    // Sum over rows of max(d(a,p) - d(a,n) + margin, 0) on encoded features.
    double triplet_loss(const Matrix& anchors, const Matrix& positives, const Matrix& negatives, double margin,
                        Vector* grad = nullptr) const;

    void save(const std::string& path) const;
    static EncoderModel load(const std::string& path);

private:
    struct Cache;

    void check_inputs(const Matrix& inputs) const;
    Matrix encode_forward(const Matrix& inputs, Cache& cache) const;
    void encode_backward(const Matrix& inputs, const Cache& cache, const Matrix& d_latent, Vector& grad) const;
    Matrix decode_forward(const Matrix& latent, Cache& cache) const;
    Matrix decode_backward(const Matrix& latent, const Cache& cache, const Matrix& d_output, Vector& grad) const;

    EncoderShape shape_;
    Vector params_;
    std::size_t encoder_params_ = 0;
};

Matrix flatten(std::span<const StateTrajectory* const> trajectories);
Matrix flatten(std::span<const StateTrajectory> trajectories);

double triplet_hinge(double d_ap, double d_an, double margin);

struct Triplet {
    std::size_t anchor = 0;
    std::size_t positive = 0;
    std::size_t negative = 0;
};

// One triplet per member: two distinct other members are drawn; the one
// closer in fitness becomes the positive (first draw wins ties).
std::vector<Triplet> mine_triplets(std::span<const double> fitness, RngStream& rng);

inline constexpr double kMarginFloor = 1e-6;

double adaptive_margin(std::span<const Vector> features, std::size_t latent_dim, MarginMode mode = MarginMode::scaled,
                       double floor = kMarginFloor);

struct TrainConfig {
    double learning_rate = 1e-2;
    std::size_t batch_size = 128;
    std::size_t max_epochs = 200;
    double early_stop_delta = 5e-4;
    std::size_t patience = 10;
    std::size_t base_interval = 10;
};

struct TrainResult {
    std::vector<double> loss_history; // mean per-sample loss of each epoch
    bool early_stopped = false;

    double final_loss() const { return loss_history.empty() ? 0.0 : loss_history.back(); }
};

struct TripletSet {
    Matrix anchors;
    Matrix positives;
    Matrix negatives;
    double margin = 1.0;

    std::size_t size() const { return static_cast<std::size_t>(anchors.rows()); }
};

TripletSet make_triplet_set(std::span<const StateTrajectory* const> trajectories, std::span<const Triplet> triplets,
                            double margin);

/// Minibatch Adam on the chosen objective with loss-plateau early stopping.
TrainResult train_reconstruction(EncoderModel& model, const Matrix& inputs, const TrainConfig& cfg, RngStream& rng);
TrainResult train_triplet(EncoderModel& model, const TripletSet& data, const TrainConfig& cfg, RngStream& rng);

/// Encoder retraining iterations with linearly growing gaps: base, 3 base, 6 base, 10 base, ...
class UpdateSchedule {
public:
    explicit UpdateSchedule(std::size_t base);

    std::size_t base() const { return base_; }
    bool is_update(std::size_t iteration) const;
    std::size_t next(); // successive U_1, U_2, ...
    std::vector<std::size_t> first(std::size_t count) const;

private:
    std::size_t base_;
    std::size_t n_ = 0;
};

// Mean silhouette coefficient; 0 for degenerate inputs (all points identical).
double silhouette(std::span<const Vector> features, std::span<const int> labels);

struct LatentDiagnostics {
    double silhouette = 0.0;
    std::vector<int> labels;           // sorted distinct labels
    std::vector<double> centroid_spread; // mean distance to the label centroid, per label
};

LatentDiagnostics latent_diagnostics(const EncoderModel& model, std::span<const StateTrajectory> trajectories,
                                     std::span<const int> labels);

struct LabeledTrajectories {
    std::vector<StateTrajectory> trajectories;
    std::vector<int> labels;
    std::vector<double> fitness;
};

/// Synthetic trajectories in `clusters` fitness-labelled groups. Each sample is
/// a large random sinusoidal nuisance signal plus a small cluster-specific
/// pattern, so the label explains little of the input variance.
LabeledTrajectories synthetic_clusters(std::size_t clusters, std::size_t per_cluster, std::size_t steps,
                                       std::size_t dims, RngStream& rng);

struct ObjectiveContrast {
    double mse_silhouette = 0.0;
    double triplet_silhouette = 0.0;
    double margin = 0.0;
    TrainResult mse;
    TrainResult triplet;
};

struct ContrastOptions {
    std::size_t clusters = 4;
    std::size_t per_cluster = 32;
    EncoderShape shape;
    TrainConfig train;
    MarginMode margin_mode = MarginMode::scaled;
};

/// Trains two encoders from the same initial weights on one synthetic cluster
/// set, one per objective, and scores the label structure of each latent space.
ObjectiveContrast contrast_objectives(std::uint64_t seed, const ContrastOptions& options = {});

} // namespace uqd

#endif
