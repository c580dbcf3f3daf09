// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright 2026 The uqd Authors

#include <uqd/env.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace uqd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Distance kept between the robot and a wall after a collision.
constexpr double kContactGap = 1e-5;
constexpr double kParallelEps = 1e-14;
constexpr double kSegmentSlack = 1e-12;

double cross(Vec2 u, Vec2 v) { return u.x * v.y - u.y * v.x; }

struct Hit {
    double distance = kInf;
    Vec2 normal; // unit normal of the hit surface, facing the ray origin
};

void check_segment(Vec2 origin, Vec2 dir, const Segment& s, Hit& best)
{
    const Vec2 e{s.b.x - s.a.x, s.b.y - s.a.y};
    const double denom = cross(dir, e);
    if (std::abs(denom) < kParallelEps)
        return;
    const Vec2 ap{s.a.x - origin.x, s.a.y - origin.y};
    const double t = cross(ap, e) / denom;
    const double u = cross(ap, dir) / denom;
    if (t < 0.0 || u < -kSegmentSlack || u > 1.0 + kSegmentSlack || t >= best.distance)
        return;
    best.distance = t;
    const double len = std::hypot(e.x, e.y);
    Vec2 n{-e.y / len, e.x / len};
    if (n.x * dir.x + n.y * dir.y > 0.0)
        n = {-n.x, -n.y};
    best.normal = n;
}

void check_border(Vec2 origin, Vec2 dir, Hit& best)
{
    auto consider = [&](double t, Vec2 n) {
        if (t >= 0.0 && t < best.distance) {
            best.distance = t;
            best.normal = n;
        }
    };
    if (dir.x > 0.0)
        consider((1.0 - origin.x) / dir.x, {-1.0, 0.0});
    else if (dir.x < 0.0)
        consider((0.0 - origin.x) / dir.x, {1.0, 0.0});
    if (dir.y > 0.0)
        consider((1.0 - origin.y) / dir.y, {0.0, -1.0});
    else if (dir.y < 0.0)
        consider((0.0 - origin.y) / dir.y, {0.0, 1.0});
}

Hit cast(Vec2 origin, Vec2 dir, const MazeWorld& world)
{
    Hit best;
    check_border(origin, dir, best);
    for (const auto& w : world.walls)
        check_segment(origin, dir, w, best);
    return best;
}

bool in_unit_square(Vec2 p) { return p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0; }

// Moves from `from` by `delta`, stopping just short of the first wall.
// Returns the contact normal when a wall was hit.
std::optional<Vec2> move_with_collision(Vec2& from, Vec2 delta, const MazeWorld& world)
{
    const double len = std::hypot(delta.x, delta.y);
    if (len == 0.0)
        return std::nullopt;
    const Vec2 dir{delta.x / len, delta.y / len};
    const Hit hit = cast(from, dir, world);
    if (hit.distance > len + kContactGap) {
        from = {from.x + delta.x, from.y + delta.y};
        return std::nullopt;
    }
    const double travel = std::max(0.0, hit.distance - kContactGap);
    from = {from.x + dir.x * travel, from.y + dir.y * travel};
    return hit.normal;
}

nlohmann::json point_json(Vec2 p) { return nlohmann::json::array({p.x, p.y}); }

} // namespace

double wrap_angle(double theta)
{
    theta = std::fmod(theta + kPi, 2.0 * kPi);
    if (theta < 0.0)
        theta += 2.0 * kPi;
    return theta - kPi;
}

void MazeWorld::validate() const
{
    auto inside = [](Vec2 p) { return std::isfinite(p.x) && std::isfinite(p.y) && in_unit_square(p); };
    for (const auto& w : walls)
        if (!inside(w.a) || !inside(w.b))
            throw Error("maze: wall endpoint outside the unit square");
    if (!inside(goal))
        throw Error("maze: goal outside the unit square");
    if (!inside(start.position) || !std::isfinite(start.heading))
        throw Error("maze: start outside the unit square");
    if (!(goal_radius > 0.0))
        throw Error("maze: goal radius must be positive");
    if (episode_length == 0)
        throw Error("maze: episode length must be positive");
}

MazeWorld MazeWorld::standard()
{
    MazeWorld w;
    w.walls = {
        {{0.25, 0.25}, {0.25, 0.75}},
        {{0.14, 0.45}, {0.0, 0.65}},
        {{0.25, 0.75}, {0.0, 0.8}},
        {{0.25, 0.75}, {0.66, 0.875}},
        {{0.355, 0.0}, {0.525, 0.185}},
        {{0.25, 0.5}, {0.75, 0.215}},
        {{1.0, 0.25}, {0.435, 0.55}},
    };
    w.goal = {0.15, 0.9};
    w.goal_radius = 0.05;
    w.start = {{0.15, 0.15}, kPi / 2.0};
    w.episode_length = 200;
    return w;
}

MazeWorld MazeWorld::from_json(const nlohmann::json& j)
{
    static const std::vector<std::string> known{"walls", "goal", "goal_radius", "start", "episode_length"};
    if (!j.is_object())
        throw Error("maze: expected a JSON object");
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw Error("maze: unknown key '" + key + "'");
    for (const auto& key : known)
        if (!j.contains(key))
            throw Error("maze: missing key '" + key + "'");

    MazeWorld w;
    try {
        for (const auto& seg : j.at("walls")) {
            if (seg.size() != 4)
                throw Error("maze: wall must be [x1, y1, x2, y2]");
            w.walls.push_back({{seg[0].get<double>(), seg[1].get<double>()}, {seg[2].get<double>(), seg[3].get<double>()}});
        }
        const auto& goal = j.at("goal");
        if (goal.size() != 2)
            throw Error("maze: goal must be [x, y]");
        w.goal = {goal[0].get<double>(), goal[1].get<double>()};
        w.goal_radius = j.at("goal_radius").get<double>();
        const auto& start = j.at("start");
        if (start.size() != 3)
            throw Error("maze: start must be [x, y, theta]");
        w.start = {{start[0].get<double>(), start[1].get<double>()}, start[2].get<double>()};
        const auto len = j.at("episode_length").get<long long>();
        if (len <= 0)
            throw Error("maze: episode length must be positive");
        w.episode_length = static_cast<std::size_t>(len);
    }
    catch (const nlohmann::json::exception& e) {
        throw Error(std::string("maze: malformed field: ") + e.what());
    }
    w.validate();
    return w;
}

MazeWorld MazeWorld::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("maze: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    }
    catch (const nlohmann::json::exception& e) {
        throw Error("maze: " + path + ": " + e.what());
    }
    return from_json(j);
}

nlohmann::json MazeWorld::to_json() const
{
    nlohmann::json walls_json = nlohmann::json::array();
    for (const auto& s : walls)
        walls_json.push_back({s.a.x, s.a.y, s.b.x, s.b.y});
    return {
        {"walls", walls_json},
        {"goal", point_json(goal)},
        {"goal_radius", goal_radius},
        {"start", {start.position.x, start.position.y, start.heading}},
        {"episode_length", episode_length},
    };
}

double ray_distance(Vec2 origin, Vec2 direction, const MazeWorld& world)
{
    return cast(origin, direction, world).distance;
}

double laser_cast(const RobotState& state, const MazeWorld& world, double angle_offset, double max_range)
{
    const double a = state.heading + angle_offset;
    const double d = ray_distance(state.position, {std::cos(a), std::sin(a)}, world);
    return std::min(d, max_range) / max_range;
}

Observation observe(const RobotState& state, const MazeWorld& world, const DriveParams& drive)
{
    Observation obs{};
    for (std::size_t i = 0; i < 3; ++i)
        obs[i] = laser_cast(state, world, drive.laser_offsets[i], drive.laser_range);
    obs[3] = state.bumper_left ? 1.0 : 0.0;
    obs[4] = state.bumper_right ? 1.0 : 0.0;
    return obs;
}

StepResult maze_step(const RobotState& state, std::array<double, 2> action, const MazeWorld& world, const DriveParams& drive)
{
    const double left = std::clamp(action[0], -1.0, 1.0);
    const double right = std::clamp(action[1], -1.0, 1.0);
    const double v = 0.5 * (left + right) * drive.v_max;
    const double omega = (right - left) / drive.axle * drive.v_max;

    RobotState next = state;
    next.bumper_left = false;
    next.bumper_right = false;

    const double mid_heading = state.heading + 0.5 * omega * drive.dt;
    const Vec2 delta{v * drive.dt * std::cos(mid_heading), v * drive.dt * std::sin(mid_heading)};
    if (const auto normal = move_with_collision(next.position, delta, world)) {
        // Front bumpers only: contact direction relative to the heading decides the side.
        const double contact = std::atan2(-normal->y, -normal->x);
        const double rel = wrap_angle(contact - mid_heading);
        if (std::abs(rel) <= kPi / 2.0) {
            if (std::abs(rel) < kPi / 12.0) {
                next.bumper_left = true;
                next.bumper_right = true;
            }
            else if (rel > 0.0)
                next.bumper_left = true;
            else
                next.bumper_right = true;
        }
    }
    next.position.x = std::clamp(next.position.x, 0.0, 1.0);
    next.position.y = std::clamp(next.position.y, 0.0, 1.0);
    next.heading = wrap_angle(state.heading + omega * drive.dt);
    return {next, observe(next, world, drive)};
}

PolicyNet::PolicyNet(std::vector<std::size_t> layers) : layers_(std::move(layers))
{
    if (layers_.size() < 2)
        throw Error("policy: need at least input and output layers");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (layers_[i] == 0 || layers_[i] > kMaxWidth)
            throw Error("policy: layer width must be in [1, 64]");
        if (i > 0)
            param_count_ += layers_[i] * layers_[i - 1] + layers_[i];
    }
}

PolicyNet PolicyNet::maze() { return PolicyNet({5, 5, 2}); }

PolicyNet PolicyNet::point_maze() { return PolicyNet({2, 5, 2}); }

void PolicyNet::forward(const Genotype& g, std::span<const double> input, std::span<double> output) const
{
    if (g.size() != param_count_)
        throw Error("policy: genotype has " + std::to_string(g.size()) + " params, expected " + std::to_string(param_count_));
    if (input.size() != input_size() || output.size() != output_size())
        throw Error("policy: input/output size mismatch");

    std::array<double, kMaxWidth> buf_a;
    std::array<double, kMaxWidth> buf_b;
    double* a = buf_a.data();
    double* b = buf_b.data();
    std::copy(input.begin(), input.end(), a);
    const double* p = g.params.data();
    for (std::size_t l = 1; l < layers_.size(); ++l) {
        const std::size_t in = layers_[l - 1];
        const std::size_t out = layers_[l];
        const double* bias = p + in * out;
        for (std::size_t o = 0; o < out; ++o) {
            double s = bias[o];
            const double* row = p + o * in;
            for (std::size_t i = 0; i < in; ++i)
                s += row[i] * a[i];
            b[o] = std::tanh(s);
        }
        p = bias + out;
        std::swap(a, b);
    }
    std::copy_n(a, output.size(), output.begin());
}

double goal_fitness(Vec2 final_position, Vec2 goal, double goal_radius)
{
    const double d = std::hypot(final_position.x - goal.x, final_position.y - goal.y);
    return d < goal_radius ? 0.0 : -d;
}

EpisodeResult run_episode(const Genotype& genotype, const MazeWorld& world, std::size_t steps, RngStream& rng,
                          const EpisodeOptions& options)
{
    static const PolicyNet policy = PolicyNet::maze();
    if (genotype.size() != policy.param_count())
        throw Error("run_episode: genotype has " + std::to_string(genotype.size()) + " params, expected "
                    + std::to_string(policy.param_count()));

    RobotState state;
    state.position = world.start.position;
    state.heading = wrap_angle(world.start.heading);
    if (options.start_jitter > 0.0) {
        state.position.x = std::clamp(state.position.x + options.start_jitter * rng.normal(), 0.0, 1.0);
        state.position.y = std::clamp(state.position.y + options.start_jitter * rng.normal(), 0.0, 1.0);
    }

    const std::size_t n = world.episode_length;
    Matrix full(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kMazeObservationDims));
    Observation obs = observe(state, world, options.drive);
    std::array<double, 2> action{};
    for (std::size_t t = 0; t < n; ++t) {
        policy.forward(genotype, obs, action);
        if (!std::isfinite(action[0]) || !std::isfinite(action[1]))
            throw NumericError("run_episode: policy produced a non-finite action");
        auto step = maze_step(state, action, world, options.drive);
        state = step.state;
        obs = step.observation;
        for (std::size_t k = 0; k < kMazeObservationDims; ++k)
            full(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) = obs[k];
    }

    EpisodeResult r;
    r.final_position = state.position;
    r.fitness = goal_fitness(state.position, world.goal, world.goal_radius);
    r.goal_reached = r.fitness == 0.0;
    r.sensor_means = full.colwise().mean().transpose();
    r.trajectory = subsample_trajectory(full, steps);
    return r;
}

namespace point_maze {

MazeWorld world()
{
    MazeWorld w;
    w.walls = {
        {{0.3, 0.3}, {0.3, 0.7}},
        {{0.3, 0.7}, {0.7, 0.7}},
        {{0.7, 0.7}, {0.7, 0.3}},
    };
    w.goal = {0.5, 0.85};
    w.goal_radius = 0.05;
    w.start = {{0.5, 0.45}, 0.0};
    w.episode_length = kEpisodeLength;
    return w;
}

EpisodeResult rollout(const Controller& controller, std::size_t steps)
{
    static const MazeWorld maze = world();
    Vec2 pos = maze.start.position;
    Matrix full(static_cast<Eigen::Index>(kEpisodeLength), 2);
    for (std::size_t t = 0; t < kEpisodeLength; ++t) {
        const auto a = controller(pos, t);
        if (!std::isfinite(a[0]) || !std::isfinite(a[1]))
            throw NumericError("point_maze: controller produced a non-finite action");
        const Vec2 delta{std::clamp(a[0], -1.0, 1.0) * kSpeed, std::clamp(a[1], -1.0, 1.0) * kSpeed};
        move_with_collision(pos, delta, maze);
        pos.x = std::clamp(pos.x, 0.0, 1.0);
        pos.y = std::clamp(pos.y, 0.0, 1.0);
        full(static_cast<Eigen::Index>(t), 0) = 2.0 * pos.x - 1.0;
        full(static_cast<Eigen::Index>(t), 1) = 2.0 * pos.y - 1.0;
    }
    EpisodeResult r;
    r.final_position = pos;
    r.fitness = goal_fitness(pos, maze.goal, maze.goal_radius);
    r.goal_reached = r.fitness == 0.0;
    r.sensor_means = full.colwise().mean().transpose();
    r.trajectory = subsample_trajectory(full, steps);
    return r;
}

} // namespace point_maze

EpisodeResult point_maze_episode(const Genotype& genotype, std::size_t steps)
{
    static const PolicyNet policy = PolicyNet::point_maze();
    if (genotype.size() != policy.param_count())
        throw Error("point_maze_episode: genotype has " + std::to_string(genotype.size()) + " params, expected "
                    + std::to_string(policy.param_count()));
    return point_maze::rollout(
        [&](Vec2 pos, std::size_t) {
            const std::array<double, 2> in{2.0 * pos.x - 1.0, 2.0 * pos.y - 1.0};
            std::array<double, 2> out{};
            policy.forward(genotype, in, out);
            return out;
        },
        steps);
}

std::string to_string(FeatureKind kind)
{
    switch (kind) {
    case FeatureKind::xy:
        return "xy";
    case FeatureKind::bumper:
        return "bumper";
    case FeatureKind::laser_mean:
        return "laser_mean";
    case FeatureKind::random_dims:
        return "random_dims";
    }
    return "?";
}

FeatureKind feature_kind_from_string(const std::string& name)
{
    if (name == "xy")
        return FeatureKind::xy;
    if (name == "bumper")
        return FeatureKind::bumper;
    if (name == "laser_mean")
        return FeatureKind::laser_mean;
    if (name == "random_dims")
        return FeatureKind::random_dims;
    throw Error("unknown feature kind '" + name + "'");
}

std::size_t feature_dim(FeatureKind kind)
{
    return kind == FeatureKind::laser_mean ? 3 : 2;
}

void RandomFeatureSpec::validate(std::size_t steps, std::size_t state_dims) const
{
    for (std::size_t k = 0; k < 2; ++k) {
        if (rows[k] >= steps || dims[k] >= state_dims)
            throw Error("random feature spec: probe index out of range");
        if (!std::isfinite(lo[k]) || !std::isfinite(hi[k]) || !(lo[k] < hi[k]))
            throw Error("random feature spec: bounds must satisfy lo < hi");
    }
}

RandomFeatureSpec RandomFeatureSpec::sample(std::size_t steps, std::size_t state_dims, RngStream& rng)
{
    RandomFeatureSpec s;
    for (std::size_t k = 0; k < 2; ++k) {
        s.rows[k] = rng.index(steps);
        s.dims[k] = rng.index(state_dims);
    }
    return s;
}

void RandomFeatureSpec::calibrate(std::span<const StateTrajectory> samples)
{
    for (std::size_t k = 0; k < 2; ++k) {
        double mn = std::numeric_limits<double>::infinity();
        double mx = -mn;
        for (const auto& tr : samples) {
            const double v = tr.states(static_cast<Eigen::Index>(rows[k]), static_cast<Eigen::Index>(dims[k]));
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        if (mx > mn) {
            lo[k] = mn;
            hi[k] = mx;
        }
        else {
            lo[k] = 0.0;
            hi[k] = 1.0;
        }
    }
}

Vector extract_feature(const EpisodeResult& result, FeatureKind kind, const RandomFeatureSpec* spec)
{
    switch (kind) {
    case FeatureKind::xy: {
        Vector f(2);
        f << std::clamp(result.final_position.x, 0.0, 1.0), std::clamp(result.final_position.y, 0.0, 1.0);
        return f;
    }
    case FeatureKind::bumper:
        if (result.sensor_means.size() != static_cast<Eigen::Index>(kMazeObservationDims))
            throw Error("bumper feature needs maze sensor data");
        return result.sensor_means.segment(3, 2);
    case FeatureKind::laser_mean:
        if (result.sensor_means.size() != static_cast<Eigen::Index>(kMazeObservationDims))
            throw Error("laser feature needs maze sensor data");
        return result.sensor_means.segment(0, 3);
    case FeatureKind::random_dims: {
        if (spec == nullptr)
            throw Error("random_dims feature needs a spec");
        spec->validate(result.trajectory.steps(), result.trajectory.dims());
        Vector f(2);
        for (std::size_t k = 0; k < 2; ++k) {
            const double v = result.trajectory.states(static_cast<Eigen::Index>(spec->rows[k]),
                                                      static_cast<Eigen::Index>(spec->dims[k]));
            const double c = std::clamp(v, spec->lo[k], spec->hi[k]);
            f[static_cast<Eigen::Index>(k)] = (c - spec->lo[k]) / (spec->hi[k] - spec->lo[k]);
        }
        return f;
    }
    }
    throw Error("unknown feature kind");
}

MazeTask::MazeTask(MazeWorld world, DriveParams drive, std::size_t steps)
    : world_(std::move(world)), drive_(drive), policy_(PolicyNet::maze()), steps_(steps)
{
    world_.validate();
    if (steps_ == 0 || steps_ > world_.episode_length)
        throw Error("maze task: trajectory steps must be in [1, episode length]");
}

EpisodeResult MazeTask::evaluate(const Genotype& genotype) const
{
    RngStream unused(0);
    EpisodeOptions opts;
    opts.drive = drive_;
    return run_episode(genotype, world_, steps_, unused, opts);
}

} // namespace uqd
