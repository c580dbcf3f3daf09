// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright 2026 The uqd Authors

#include <uqd/encoder.hpp>
#include <uqd/kernels.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

namespace uqd {

namespace {

struct Block {
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t size() const { return rows * cols; }
};

// MLP: W1 b1 W2 b2 | W3 b3 W4 b4
// Recurrent: Wx Wh b Wl bl | Ux Ug c Wo bo
enum MlpBlock { kW1, kB1, kW2, kB2, kW3, kB3, kW4, kB4 };
enum RnnBlock { kWx, kWh, kBh, kWl, kBl, kUx, kUg, kBg, kWo, kBo };

struct Layout {
    std::vector<Block> blocks;
    std::size_t encoder_end = 0;
    std::size_t total = 0;
};

Layout make_layout(const EncoderShape& s)
{
    const std::size_t n = s.input_size();
    const std::size_t hid = s.hidden;
    const std::size_t lat = s.latent;
    std::vector<std::pair<std::size_t, std::size_t>> dims;
    std::size_t encoder_blocks = 0;
    if (s.architecture == Architecture::mlp) {
        dims = {{hid, n}, {1, hid}, {lat, hid}, {1, lat}, {hid, lat}, {1, hid}, {n, hid}, {1, n}};
        encoder_blocks = 4;
    }
    else {
        dims = {{hid, s.dims}, {hid, hid}, {1, hid}, {lat, hid}, {1, lat},
                {hid, lat},    {hid, hid}, {1, hid}, {s.dims, hid}, {1, s.dims}};
        encoder_blocks = 5;
    }
    Layout l;
    std::size_t off = 0;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        l.blocks.push_back({off, dims[i].first, dims[i].second});
        off += dims[i].first * dims[i].second;
        if (i + 1 == encoder_blocks)
            l.encoder_end = off;
    }
    l.total = off;
    return l;
}

using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;

ConstMap view(const Vector& p, const Block& b)
{
    return ConstMap(p.data() + b.offset, static_cast<Eigen::Index>(b.rows), static_cast<Eigen::Index>(b.cols));
}

MutMap view(Vector& p, const Block& b)
{
    return MutMap(p.data() + b.offset, static_cast<Eigen::Index>(b.rows), static_cast<Eigen::Index>(b.cols));
}

Matrix affine(const Matrix& x, const ConstMap& w, const ConstMap& bias)
{
    Matrix z = x * w.transpose();
    z.rowwise() += bias.row(0);
    return z;
}

Matrix tanh_of(const Matrix& z)
{
    return z.array().tanh().matrix();
}

Matrix tanh_grad(const Matrix& d_out, const Matrix& activated)
{
    return (d_out.array() * (1.0 - activated.array().square())).matrix();
}

constexpr char kCheckpointMagic[8] = {'U', 'Q', 'D', 'E', 'N', 'C', '0', '1'};

} // namespace

std::string to_string(Architecture a)
{
    return a == Architecture::mlp ? "mlp" : "recurrent";
}

std::string to_string(Objective o)
{
    return o == Objective::mse ? "mse" : "triplet";
}

std::string to_string(MarginMode m)
{
    return m == MarginMode::scaled ? "scaled" : "plain";
}

Architecture architecture_from_string(const std::string& s)
{
    if (s == "mlp")
        return Architecture::mlp;
    if (s == "recurrent")
        return Architecture::recurrent;
    throw Error("unknown encoder architecture '" + s + "'");
}

MarginMode margin_mode_from_string(const std::string& s)
{
    if (s == "scaled")
        return MarginMode::scaled;
    if (s == "plain")
        return MarginMode::plain;
    throw Error("unknown margin mode '" + s + "'");
}

struct EncoderModel::Cache {
    Matrix enc_hidden;              // mlp
    Matrix dec_hidden;              // mlp
    std::vector<Matrix> enc_states; // recurrent, one per step
    std::vector<Matrix> dec_states; // recurrent, one per step
};

EncoderModel::EncoderModel(EncoderShape shape, RngStream& rng) : shape_(shape)
{
    if (shape_.steps == 0 || shape_.dims == 0 || shape_.hidden == 0 || shape_.latent == 0)
        throw Error("encoder: every shape dimension must be positive");
    const Layout layout = make_layout(shape_);
    encoder_params_ = layout.encoder_end;
    params_ = Vector::Zero(static_cast<Eigen::Index>(layout.total));
    for (const auto& b : layout.blocks) {
        if (b.rows == 1)
            continue; // biases start at zero
        const double limit = std::sqrt(6.0 / static_cast<double>(b.rows + b.cols));
        for (std::size_t i = 0; i < b.size(); ++i)
            params_[static_cast<Eigen::Index>(b.offset + i)] = rng.uniform(-limit, limit);
    }
}

EncoderModel::EncoderModel(EncoderShape shape, Vector params) : shape_(shape), params_(std::move(params))
{
    const Layout layout = make_layout(shape_);
    encoder_params_ = layout.encoder_end;
    if (static_cast<std::size_t>(params_.size()) != layout.total)
        throw Error("encoder: parameter vector has " + std::to_string(params_.size()) + " entries, expected "
                    + std::to_string(layout.total));
}

void EncoderModel::check_inputs(const Matrix& inputs) const
{
    if (static_cast<std::size_t>(inputs.cols()) != shape_.input_size())
        throw Error("encoder: input has " + std::to_string(inputs.cols()) + " columns, expected "
                    + std::to_string(shape_.input_size()));
}

Matrix EncoderModel::encode_forward(const Matrix& inputs, Cache& cache) const
{
    const Layout layout = make_layout(shape_);
    const auto& bl = layout.blocks;
    if (shape_.architecture == Architecture::mlp) {
        cache.enc_hidden = tanh_of(affine(inputs, view(params_, bl[kW1]), view(params_, bl[kB1])));
        return affine(cache.enc_hidden, view(params_, bl[kW2]), view(params_, bl[kB2]));
    }
    const auto d = static_cast<Eigen::Index>(shape_.dims);
    const auto wx = view(params_, bl[kWx]);
    const auto wh = view(params_, bl[kWh]);
    const auto bh = view(params_, bl[kBh]);
    cache.enc_states.assign(shape_.steps, Matrix());
    Matrix h = Matrix::Zero(inputs.rows(), static_cast<Eigen::Index>(shape_.hidden));
    for (std::size_t t = 0; t < shape_.steps; ++t) {
        Matrix z = inputs.middleCols(static_cast<Eigen::Index>(t) * d, d) * wx.transpose();
        if (t > 0)
            z.noalias() += h * wh.transpose();
        z.rowwise() += bh.row(0);
        h = tanh_of(z);
        cache.enc_states[t] = h;
    }
    return affine(h, view(params_, bl[kWl]), view(params_, bl[kBl]));
}

void EncoderModel::encode_backward(const Matrix& inputs, const Cache& cache, const Matrix& d_latent, Vector& grad) const
{
    const Layout layout = make_layout(shape_);
    const auto& bl = layout.blocks;
    if (shape_.architecture == Architecture::mlp) {
        view(grad, bl[kW2]).noalias() += d_latent.transpose() * cache.enc_hidden;
        view(grad, bl[kB2]).row(0) += d_latent.colwise().sum();
        const Matrix dz = tanh_grad(d_latent * view(params_, bl[kW2]), cache.enc_hidden);
        view(grad, bl[kW1]).noalias() += dz.transpose() * inputs;
        view(grad, bl[kB1]).row(0) += dz.colwise().sum();
        return;
    }
    const auto d = static_cast<Eigen::Index>(shape_.dims);
    const auto wh = view(params_, bl[kWh]);
    const Matrix& last = cache.enc_states.back();
    view(grad, bl[kWl]).noalias() += d_latent.transpose() * last;
    view(grad, bl[kBl]).row(0) += d_latent.colwise().sum();
    Matrix dh = d_latent * view(params_, bl[kWl]);
    auto g_wx = view(grad, bl[kWx]);
    auto g_wh = view(grad, bl[kWh]);
    auto g_bh = view(grad, bl[kBh]);
    for (std::size_t t = shape_.steps; t-- > 0;) {
        const Matrix dz = tanh_grad(dh, cache.enc_states[t]);
        g_wx.noalias() += dz.transpose() * inputs.middleCols(static_cast<Eigen::Index>(t) * d, d);
        if (t > 0)
            g_wh.noalias() += dz.transpose() * cache.enc_states[t - 1];
        g_bh.row(0) += dz.colwise().sum();
        dh = dz * wh;
    }
}

Matrix EncoderModel::decode_forward(const Matrix& latent, Cache& cache) const
{
    const Layout layout = make_layout(shape_);
    const auto& bl = layout.blocks;
    if (shape_.architecture == Architecture::mlp) {
        cache.dec_hidden = tanh_of(affine(latent, view(params_, bl[kW3]), view(params_, bl[kB3])));
        return affine(cache.dec_hidden, view(params_, bl[kW4]), view(params_, bl[kB4]));
    }
    const auto d = static_cast<Eigen::Index>(shape_.dims);
    const Matrix drive = affine(latent, view(params_, bl[kUx]), view(params_, bl[kBg]));
    const auto ug = view(params_, bl[kUg]);
    const auto wo = view(params_, bl[kWo]);
    const auto bo = view(params_, bl[kBo]);
    Matrix out(latent.rows(), static_cast<Eigen::Index>(shape_.input_size()));
    cache.dec_states.assign(shape_.steps, Matrix());
    Matrix g;
    for (std::size_t t = 0; t < shape_.steps; ++t) {
        Matrix z = drive;
        if (t > 0)
            z.noalias() += g * ug.transpose();
        g = tanh_of(z);
        cache.dec_states[t] = g;
        Matrix y = g * wo.transpose();
        y.rowwise() += bo.row(0);
        out.middleCols(static_cast<Eigen::Index>(t) * d, d) = y;
    }
    return out;
}

Matrix EncoderModel::decode_backward(const Matrix& latent, const Cache& cache, const Matrix& d_output, Vector& grad) const
{
    const Layout layout = make_layout(shape_);
    const auto& bl = layout.blocks;
    if (shape_.architecture == Architecture::mlp) {
        view(grad, bl[kW4]).noalias() += d_output.transpose() * cache.dec_hidden;
        view(grad, bl[kB4]).row(0) += d_output.colwise().sum();
        const Matrix dz = tanh_grad(d_output * view(params_, bl[kW4]), cache.dec_hidden);
        view(grad, bl[kW3]).noalias() += dz.transpose() * latent;
        view(grad, bl[kB3]).row(0) += dz.colwise().sum();
        return dz * view(params_, bl[kW3]);
    }
    const auto d = static_cast<Eigen::Index>(shape_.dims);
    const auto ug = view(params_, bl[kUg]);
    const auto wo = view(params_, bl[kWo]);
    auto g_ug = view(grad, bl[kUg]);
    auto g_wo = view(grad, bl[kWo]);
    auto g_bo = view(grad, bl[kBo]);
    Matrix d_drive = Matrix::Zero(latent.rows(), static_cast<Eigen::Index>(shape_.hidden));
    Matrix d_next = Matrix::Zero(latent.rows(), static_cast<Eigen::Index>(shape_.hidden));
    for (std::size_t t = shape_.steps; t-- > 0;) {
        const auto dy = d_output.middleCols(static_cast<Eigen::Index>(t) * d, d);
        g_wo.noalias() += dy.transpose() * cache.dec_states[t];
        g_bo.row(0) += dy.colwise().sum();
        Matrix dg = dy * wo;
        dg += d_next;
        const Matrix dz = tanh_grad(dg, cache.dec_states[t]);
        if (t > 0)
            g_ug.noalias() += dz.transpose() * cache.dec_states[t - 1];
        d_drive += dz;
        d_next = dz * ug;
    }
    view(grad, bl[kUx]).noalias() += d_drive.transpose() * latent;
    view(grad, bl[kBg]).row(0) += d_drive.colwise().sum();
    return d_drive * view(params_, bl[kUx]);
}

Vector EncoderModel::encode(const StateTrajectory& trajectory) const
{
    if (trajectory.steps() != shape_.steps || trajectory.dims() != shape_.dims)
        throw Error("encoder: trajectory is " + std::to_string(trajectory.steps()) + "x" + std::to_string(trajectory.dims())
                    + ", expected " + std::to_string(shape_.steps) + "x" + std::to_string(shape_.dims));
    const Matrix row = Eigen::Map<const Matrix>(trajectory.states.data(), 1, static_cast<Eigen::Index>(shape_.input_size()));
    Cache cache;
    return encode_forward(row, cache).row(0).transpose();
}

Matrix EncoderModel::encode_batch(const Matrix& inputs) const
{
    check_inputs(inputs);
    Cache cache;
    return encode_forward(inputs, cache);
}

Matrix EncoderModel::reconstruct_batch(const Matrix& inputs) const
{
    check_inputs(inputs);
    Cache cache;
    const Matrix latent = encode_forward(inputs, cache);
    return decode_forward(latent, cache);
}

double EncoderModel::reconstruction_loss(const Matrix& inputs, Vector* grad) const
{
    check_inputs(inputs);
    if (inputs.rows() == 0)
        throw Error("encoder: empty batch");
    Cache cache;
    const Matrix latent = encode_forward(inputs, cache);
    const Matrix diff = decode_forward(latent, cache) - inputs;
    const double scale = 1.0 / static_cast<double>(diff.size());
    const double loss = diff.squaredNorm() * scale;
    if (grad != nullptr) {
        if (grad->size() != params_.size())
            *grad = Vector::Zero(params_.size());
        const Matrix d_out = (2.0 * scale) * diff;
        const Matrix d_latent = decode_backward(latent, cache, d_out, *grad);
        encode_backward(inputs, cache, d_latent, *grad);
    }
    return loss;
}

double triplet_hinge(double d_ap, double d_an, double margin)
{
    return std::max(d_ap - d_an + margin, 0.0);
}

double EncoderModel::triplet_loss(const Matrix& anchors, const Matrix& positives, const Matrix& negatives, double margin,
                                  Vector* grad) const
{
    check_inputs(anchors);
    check_inputs(positives);
    check_inputs(negatives);
    if (anchors.rows() != positives.rows() || anchors.rows() != negatives.rows())
        throw Error("triplet_loss: anchor/positive/negative counts differ");
    if (!(margin > 0.0))
        throw Error("triplet_loss: margin must be positive");

    Cache ca;
    Cache cp;
    Cache cn;
    const Matrix fa = encode_forward(anchors, ca);
    const Matrix fp = encode_forward(positives, cp);
    const Matrix fn = encode_forward(negatives, cn);

    Matrix da = Matrix::Zero(fa.rows(), fa.cols());
    Matrix dp = Matrix::Zero(fa.rows(), fa.cols());
    Matrix dn = Matrix::Zero(fa.rows(), fa.cols());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < fa.rows(); ++i) {
        const Eigen::RowVectorXd ap = fa.row(i) - fp.row(i);
        const Eigen::RowVectorXd an = fa.row(i) - fn.row(i);
        const double d_ap = ap.norm();
        const double d_an = an.norm();
        const double h = triplet_hinge(d_ap, d_an, margin);
        loss += h;
        if (h <= 0.0)
            continue;
        // Distances are not differentiable at zero; use the zero subgradient there.
        const Eigen::RowVectorXd u_ap = d_ap > 1e-12 ? Eigen::RowVectorXd(ap / d_ap) : Eigen::RowVectorXd::Zero(ap.size());
        const Eigen::RowVectorXd u_an = d_an > 1e-12 ? Eigen::RowVectorXd(an / d_an) : Eigen::RowVectorXd::Zero(an.size());
        da.row(i) = u_ap - u_an;
        dp.row(i) = -u_ap;
        dn.row(i) = u_an;
    }
    if (grad != nullptr) {
        if (grad->size() != params_.size())
            *grad = Vector::Zero(params_.size());
        encode_backward(anchors, ca, da, *grad);
        encode_backward(positives, cp, dp, *grad);
        encode_backward(negatives, cn, dn, *grad);
    }
    return loss;
}

void EncoderModel::save(const std::string& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("checkpoint: cannot write " + path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    const std::array<std::uint64_t, 6> header{
        static_cast<std::uint64_t>(shape_.architecture == Architecture::mlp ? 0 : 1),
        shape_.steps,
        shape_.dims,
        shape_.hidden,
        shape_.latent,
        static_cast<std::uint64_t>(params_.size()),
    };
    out.write(reinterpret_cast<const char*>(header.data()), sizeof(header));
    out.write(reinterpret_cast<const char*>(params_.data()), static_cast<std::streamsize>(sizeof(double) * params_.size()));
    if (!out)
        throw Error("checkpoint: write failed for " + path);
}

EncoderModel EncoderModel::load(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("checkpoint: cannot open " + path);
    char magic[sizeof(kCheckpointMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw Error("checkpoint: " + path + " is not an encoder checkpoint");
    std::array<std::uint64_t, 6> header{};
    in.read(reinterpret_cast<char*>(header.data()), sizeof(header));
    if (!in || header[0] > 1)
        throw Error("checkpoint: corrupt header in " + path);
    EncoderShape shape;
    shape.architecture = header[0] == 0 ? Architecture::mlp : Architecture::recurrent;
    shape.steps = header[1];
    shape.dims = header[2];
    shape.hidden = header[3];
    shape.latent = header[4];
    if (header[5] != make_layout(shape).total)
        throw Error("checkpoint: parameter count does not match architecture in " + path);
    Vector params(static_cast<Eigen::Index>(header[5]));
    in.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(sizeof(double) * params.size()));
    if (!in)
        throw Error("checkpoint: truncated parameters in " + path);
    return EncoderModel(shape, std::move(params));
}

Matrix flatten(std::span<const StateTrajectory* const> trajectories)
{
    if (trajectories.empty())
        return Matrix();
    const auto cols = trajectories.front()->states.size();
    Matrix out(static_cast<Eigen::Index>(trajectories.size()), cols);
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        const auto& s = trajectories[i]->states;
        if (s.size() != cols)
            throw Error("flatten: trajectories differ in shape");
        out.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(s.data(), cols);
    }
    return out;
}

Matrix flatten(std::span<const StateTrajectory> trajectories)
{
    std::vector<const StateTrajectory*> ptrs;
    ptrs.reserve(trajectories.size());
    for (const auto& t : trajectories)
        ptrs.push_back(&t);
    return flatten(std::span<const StateTrajectory* const>(ptrs));
}

std::vector<Triplet> mine_triplets(std::span<const double> fitness, RngStream& rng)
{
    const std::size_t n = fitness.size();
    if (n < 3)
        throw Error("mine_triplets: need at least 3 solutions, got " + std::to_string(n));
    std::vector<Triplet> out(n);
    for (std::size_t a = 0; a < n; ++a) {
        // Uniform over the others, then uniform over the remaining others.
        std::size_t first = rng.index(n - 1);
        if (first >= a)
            ++first;
        std::size_t second = rng.index(n - 2);
        const std::size_t lo = std::min(a, first);
        const std::size_t hi = std::max(a, first);
        if (second >= lo)
            ++second;
        if (second >= hi)
            ++second;
        const double d_first = std::abs(fitness[first] - fitness[a]);
        const double d_second = std::abs(fitness[second] - fitness[a]);
        out[a] = d_second < d_first ? Triplet{a, second, first} : Triplet{a, first, second};
    }
    return out;
}

double adaptive_margin(std::span<const Vector> features, std::size_t latent_dim, MarginMode mode, double floor)
{
    if (features.size() < 2)
        throw Error("adaptive_margin: need at least 2 solutions");
    const double d_min = kernels::parallel::min_pairwise_distance(features);
    if (d_min == 0.0)
        return floor;
    return mode == MarginMode::scaled ? static_cast<double>(latent_dim) * d_min : d_min;
}

TripletSet make_triplet_set(std::span<const StateTrajectory* const> trajectories, std::span<const Triplet> triplets,
                            double margin)
{
    std::vector<const StateTrajectory*> a;
    std::vector<const StateTrajectory*> p;
    std::vector<const StateTrajectory*> n;
    for (const auto& t : triplets) {
        a.push_back(trajectories[t.anchor]);
        p.push_back(trajectories[t.positive]);
        n.push_back(trajectories[t.negative]);
    }
    return {flatten(std::span<const StateTrajectory* const>(a)), flatten(std::span<const StateTrajectory* const>(p)),
            flatten(std::span<const StateTrajectory* const>(n)), margin};
}

namespace {

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows)
{
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

class Adam {
public:
    Adam(std::size_t n, double lr) : lr_(lr), m_(Vector::Zero(static_cast<Eigen::Index>(n))), v_(m_) {}

    void step(Vector& params, const Vector& grad)
    {
        constexpr double b1 = 0.9;
        constexpr double b2 = 0.999;
        constexpr double eps = 1e-8;
        ++t_;
        m_ = b1 * m_ + (1.0 - b1) * grad;
        v_ = b2 * v_ + (1.0 - b2) * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
        params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps);
    }

private:
    double lr_;
    Vector m_;
    Vector v_;
    std::size_t t_ = 0;
};

// batch_loss(rows, grad) returns the batch-mean loss and its gradient.
template <typename BatchLoss>
TrainResult run_training(EncoderModel& model, std::size_t samples, const TrainConfig& cfg, RngStream& rng, BatchLoss batch_loss)
{
    if (samples == 0)
        throw Error("train: no training data");
    if (cfg.batch_size == 0 || !(cfg.learning_rate > 0.0))
        throw Error("train: batch size and learning rate must be positive");

    TrainResult result;
    Adam opt(model.param_count(), cfg.learning_rate);
    std::vector<std::size_t> order(samples);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Vector grad = Vector::Zero(static_cast<Eigen::Index>(model.param_count()));
    double best = std::numeric_limits<double>::infinity();
    std::size_t stale = 0;

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng.engine());
        double total = 0.0;
        for (std::size_t start = 0; start < samples; start += cfg.batch_size) {
            const std::size_t len = std::min(cfg.batch_size, samples - start);
            grad.setZero();
            const double loss = batch_loss(std::span<const std::size_t>(order.data() + start, len), grad);
            if (!std::isfinite(loss) || !grad.allFinite())
                throw NumericError("train: loss diverged (non-finite value at epoch " + std::to_string(epoch) + ")");
            total += loss * static_cast<double>(len);
            opt.step(model.params(), grad);
        }
        if (!model.params().allFinite())
            throw NumericError("train: non-finite parameters after epoch " + std::to_string(epoch));
        const double epoch_loss = total / static_cast<double>(samples);
        result.loss_history.push_back(epoch_loss);
        if (best - epoch_loss > cfg.early_stop_delta) {
            best = epoch_loss;
            stale = 0;
        }
        else if (++stale >= cfg.patience) {
            result.early_stopped = true;
            break;
        }
    }
    return result;
}

} // namespace

TrainResult train_reconstruction(EncoderModel& model, const Matrix& inputs, const TrainConfig& cfg, RngStream& rng)
{
    return run_training(model, static_cast<std::size_t>(inputs.rows()), cfg, rng,
                        [&](std::span<const std::size_t> rows, Vector& grad) {
                            return model.reconstruction_loss(gather_rows(inputs, rows), &grad);
                        });
}

TrainResult train_triplet(EncoderModel& model, const TripletSet& data, const TrainConfig& cfg, RngStream& rng)
{
    if (!(data.margin > 0.0))
        throw Error("train_triplet: margin must be positive");
    return run_training(model, data.size(), cfg, rng, [&](std::span<const std::size_t> rows, Vector& grad) {
        const double inv = 1.0 / static_cast<double>(rows.size());
        const double sum = model.triplet_loss(gather_rows(data.anchors, rows), gather_rows(data.positives, rows),
                                              gather_rows(data.negatives, rows), data.margin, &grad);
        grad *= inv;
        return sum * inv;
    });
}

UpdateSchedule::UpdateSchedule(std::size_t base) : base_(base)
{
    if (base_ == 0)
        throw Error("update schedule: base interval must be at least 1");
}

bool UpdateSchedule::is_update(std::size_t iteration) const
{
    if (iteration == 0 || iteration % base_ != 0)
        return false;
    const std::size_t k = iteration / base_; // must be triangular
    std::size_t n = static_cast<std::size_t>((std::sqrt(8.0 * static_cast<double>(k) + 1.0) - 1.0) / 2.0);
    while (n * (n + 1) / 2 > k)
        --n;
    while ((n + 1) * (n + 2) / 2 <= k)
        ++n;
    return n * (n + 1) / 2 == k;
}

std::size_t UpdateSchedule::next()
{
    ++n_;
    return base_ * n_ * (n_ + 1) / 2;
}

std::vector<std::size_t> UpdateSchedule::first(std::size_t count) const
{
    UpdateSchedule copy(base_);
    std::vector<std::size_t> out(count);
    for (auto& u : out)
        u = copy.next();
    return out;
}

double silhouette(std::span<const Vector> features, std::span<const int> labels)
{
    const std::size_t n = features.size();
    if (labels.size() != n)
        throw Error("silhouette: label count mismatch");
    std::map<int, std::size_t> label_index;
    for (int l : labels)
        label_index.emplace(l, 0);
    if (label_index.size() < 2)
        throw Error("silhouette: need at least two labels");
    std::size_t k = 0;
    for (auto& [l, idx] : label_index)
        idx = k++;

    std::vector<std::size_t> group(n);
    std::vector<std::size_t> group_size(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        group[i] = label_index.at(labels[i]);
        ++group_size[group[i]];
    }

    double total = 0.0;
    std::vector<double> sums(k);
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i)
                sums[group[j]] += euclidean_distance(features[i], features[j]);
        const std::size_t own = group[i];
        if (group_size[own] < 2)
            continue; // singleton clusters score 0
        const double a = sums[own] / static_cast<double>(group_size[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < k; ++g)
            if (g != own && group_size[g] > 0)
                b = std::min(b, sums[g] / static_cast<double>(group_size[g]));
        const double denom = std::max(a, b);
        if (denom > 0.0)
            total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

LatentDiagnostics latent_diagnostics(const EncoderModel& model, std::span<const StateTrajectory> trajectories,
                                     std::span<const int> labels)
{
    if (trajectories.size() != labels.size())
        throw Error("latent_diagnostics: label count mismatch");
    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
        members[labels[i]].push_back(i);
    if (members.size() < 2)
        throw Error("latent_diagnostics: need at least two labels");
    for (const auto& [l, idx] : members)
        if (idx.size() < 2)
            throw Error("latent_diagnostics: every label needs at least two samples");

    const Matrix encoded = model.encode_batch(flatten(trajectories));
    std::vector<Vector> features(trajectories.size());
    for (std::size_t i = 0; i < features.size(); ++i)
        features[i] = encoded.row(static_cast<Eigen::Index>(i)).transpose();

    LatentDiagnostics out;
    out.silhouette = silhouette(features, labels);
    for (const auto& [l, idx] : members) {
        Vector centroid = Vector::Zero(encoded.cols());
        for (auto i : idx)
            centroid += features[i];
        centroid /= static_cast<double>(idx.size());
        double spread = 0.0;
        for (auto i : idx)
            spread += euclidean_distance(features[i], centroid);
        out.labels.push_back(l);
        out.centroid_spread.push_back(spread / static_cast<double>(idx.size()));
    }
    return out;
}

LabeledTrajectories synthetic_clusters(std::size_t clusters, std::size_t per_cluster, std::size_t steps, std::size_t dims,
                                       RngStream& rng)
{
    if (clusters < 2 || per_cluster < 2 || steps == 0 || dims == 0)
        throw Error("synthetic_clusters: need >= 2 clusters of >= 2 samples and a non-empty shape");
    constexpr double kPatternScale = 0.12;
    constexpr double kNoise = 0.02;
    const auto rows = static_cast<Eigen::Index>(steps);
    const auto cols = static_cast<Eigen::Index>(dims);

    std::vector<Matrix> patterns(clusters, Matrix(rows, cols));
    for (auto& p : patterns)
        for (Eigen::Index i = 0; i < p.size(); ++i)
            p.data()[i] = kPatternScale * rng.normal();

    LabeledTrajectories out;
    for (std::size_t c = 0; c < clusters; ++c) {
        for (std::size_t s = 0; s < per_cluster; ++s) {
            Matrix m(rows, cols);
            for (Eigen::Index d = 0; d < cols; ++d) {
                const double amp = rng.uniform(0.3, 0.6);
                const double freq = rng.uniform(0.5, 3.0) * 2.0 * 3.14159265358979323846 / static_cast<double>(steps);
                const double phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
                for (Eigen::Index t = 0; t < rows; ++t)
                    m(t, d) = amp * std::sin(freq * static_cast<double>(t) + phase) + patterns[c](t, d) + kNoise * rng.normal();
            }
            out.trajectories.push_back({m.cwiseMax(-1.0).cwiseMin(1.0)});
            out.labels.push_back(static_cast<int>(c));
            out.fitness.push_back(static_cast<double>(c));
        }
    }
    return out;
}

ObjectiveContrast contrast_objectives(std::uint64_t seed, const ContrastOptions& options)
{
    const RngStream root(seed);
    RngStream data_rng = root.child(0);
    const auto data = synthetic_clusters(options.clusters, options.per_cluster, options.shape.steps, options.shape.dims,
                                         data_rng);
    RngStream init_rng = root.child(1);
    const EncoderModel initial(options.shape, init_rng);

    std::vector<const StateTrajectory*> ptrs;
    for (const auto& t : data.trajectories)
        ptrs.push_back(&t);
    const Matrix inputs = flatten(ptrs);

    ObjectiveContrast out;
    EncoderModel mse_model = initial;
    RngStream mse_rng = root.child(2);
    out.mse = train_reconstruction(mse_model, inputs, options.train, mse_rng);
    out.mse_silhouette = latent_diagnostics(mse_model, data.trajectories, data.labels).silhouette;

    EncoderModel triplet_model = initial;
    const Matrix encoded = initial.encode_batch(inputs);
    std::vector<Vector> features;
    for (Eigen::Index i = 0; i < encoded.rows(); ++i)
        features.push_back(encoded.row(i).transpose());
    out.margin = adaptive_margin(features, options.shape.latent, options.margin_mode);
    RngStream mine_rng = root.child(3);
    const auto triplets = mine_triplets(data.fitness, mine_rng);
    RngStream triplet_rng = root.child(2);
    out.triplet = train_triplet(triplet_model, make_triplet_set(ptrs, triplets, out.margin), options.train, triplet_rng);
    out.triplet_silhouette = latent_diagnostics(triplet_model, data.trajectories, data.labels).silhouette;
    return out;
}

} // namespace uqd
