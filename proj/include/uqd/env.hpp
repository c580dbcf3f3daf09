// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright 2026 The uqd Authors

#ifndef UQD_ENV_HPP
#define UQD_ENV_HPP

#include <uqd/core.hpp>

#include <json.hpp>

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace uqd {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct Segment {
    Vec2 a;
    Vec2 b;
};

struct Pose {
    Vec2 position;
    double heading = 0.0; // radians
};

/// Maze in the unit square. The square's border always acts as a wall and
/// does not need to be listed in `walls`.
struct MazeWorld {
    std::vector<Segment> walls;
    Vec2 goal;
    double goal_radius = 0.05;
    Pose start;
    std::size_t episode_length = 200;

    void validate() const;

    /// Two-wheeled robot maze with the goal hidden behind a wall above the start.
    static MazeWorld standard();
    static MazeWorld from_json(const nlohmann::json& j);
    static MazeWorld load(const std::string& path);
    nlohmann::json to_json() const;
};

struct DriveParams {
    double v_max = 0.03; // units per step at full wheel speed
    double axle = 0.05;
    double dt = 1.0;
    double laser_range = 0.2;
    std::array<double, 3> laser_offsets{-kPi / 4.0, 0.0, kPi / 4.0};
};

struct RobotState {
    Vec2 position;
    double heading = 0.0; // [-pi, pi)
    bool bumper_left = false;
    bool bumper_right = false;
};

// [laser -45deg, laser 0, laser +45deg, left bumper, right bumper]
using Observation = std::array<double, 5>;
inline constexpr std::size_t kMazeObservationDims = 5;

struct StepResult {
    RobotState state;
    Observation observation;
};

double wrap_angle(double theta);

// Distance along the ray to the closest wall (border included), or +inf.
double ray_distance(Vec2 origin, Vec2 direction, const MazeWorld& world);

/// Normalized range reading in [0, 1]; 1 means nothing within `max_range`.
double laser_cast(const RobotState& state, const MazeWorld& world, double angle_offset, double max_range);

Observation observe(const RobotState& state, const MazeWorld& world, const DriveParams& drive);

StepResult maze_step(const RobotState& state, std::array<double, 2> action, const MazeWorld& world, const DriveParams& drive);

/// Fully connected policy with tanh on every layer. Parameters are packed
/// layer by layer as a row-major weight matrix followed by the biases.
class PolicyNet {
public:
    static constexpr std::size_t kMaxWidth = 64;

    explicit PolicyNet(std::vector<std::size_t> layers);

    static PolicyNet maze();       // 5 -> 5 -> 2
    static PolicyNet point_maze(); // 2 -> 5 -> 2

    const std::vector<std::size_t>& layers() const { return layers_; }
    std::size_t input_size() const { return layers_.front(); }
    std::size_t output_size() const { return layers_.back(); }
    std::size_t param_count() const { return param_count_; }

    void forward(const Genotype& g, std::span<const double> input, std::span<double> output) const;

private:
    std::vector<std::size_t> layers_;
    std::size_t param_count_ = 0;
};

struct EpisodeResult {
    double fitness = 0.0;
    StateTrajectory trajectory;
    Vec2 final_position;
    bool goal_reached = false;
    Vector sensor_means; // per-observation-dim mean over every step of the episode
};

struct EpisodeOptions {
    DriveParams drive;
    double start_jitter = 0.0; // std-dev of start position noise; 0 disables
};

double goal_fitness(Vec2 final_position, Vec2 goal, double goal_radius);

EpisodeResult run_episode(const Genotype& genotype, const MazeWorld& world, std::size_t steps, RngStream& rng,
                          const EpisodeOptions& options = {});

// Synthetic point-agent maze: U-shaped wall around the start, goal above it.
namespace point_maze {
inline constexpr std::size_t kEpisodeLength = 100;
inline constexpr std::size_t kTrajectorySteps = 25;
inline constexpr double kSpeed = 0.04;

MazeWorld world();

using Controller = std::function<std::array<double, 2>(Vec2 position, std::size_t step)>;

EpisodeResult rollout(const Controller& controller, std::size_t steps = kTrajectorySteps);
} // namespace point_maze

EpisodeResult point_maze_episode(const Genotype& genotype, std::size_t steps = point_maze::kTrajectorySteps);

enum class FeatureKind { xy, bumper, laser_mean, random_dims };

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& name);

/// Two randomly chosen (trajectory row, state dim) probes, clipped to
/// empirical bounds and min-max normalized.
struct RandomFeatureSpec {
    std::array<std::size_t, 2> rows{};
    std::array<std::size_t, 2> dims{};
    std::array<double, 2> lo{0.0, 0.0};
    std::array<double, 2> hi{1.0, 1.0};

    void validate(std::size_t steps, std::size_t state_dims) const;

    static RandomFeatureSpec sample(std::size_t steps, std::size_t state_dims, RngStream& rng);
    // Bounds become the observed min/max of each probe; degenerate probes keep [0, 1].
    void calibrate(std::span<const StateTrajectory> samples);
};

std::size_t feature_dim(FeatureKind kind);

Vector extract_feature(const EpisodeResult& result, FeatureKind kind, const RandomFeatureSpec* spec = nullptr);

/// Black-box episodic task evaluated by the search loops. Implementations are
/// immutable and `evaluate` is safe to call concurrently.
class Task {
public:
    virtual ~Task() = default;

    virtual std::string name() const = 0;
    virtual std::size_t genotype_size() const = 0;
    virtual std::size_t trajectory_steps() const = 0;
    virtual std::size_t trajectory_dims() const = 0;
    virtual EpisodeResult evaluate(const Genotype& genotype) const = 0;
};

class MazeTask : public Task {
public:
    explicit MazeTask(MazeWorld world, DriveParams drive = {}, std::size_t steps = 50);

    std::string name() const override { return "maze"; }
    std::size_t genotype_size() const override { return policy_.param_count(); }
    std::size_t trajectory_steps() const override { return steps_; }
    std::size_t trajectory_dims() const override { return kMazeObservationDims; }
    EpisodeResult evaluate(const Genotype& genotype) const override;

    const MazeWorld& world() const { return world_; }

private:
    MazeWorld world_;
    DriveParams drive_;
    PolicyNet policy_;
    std::size_t steps_;
};

class PointMazeTask : public Task {
public:
    std::string name() const override { return "point_maze"; }
    std::size_t genotype_size() const override { return PolicyNet::point_maze().param_count(); }
    std::size_t trajectory_steps() const override { return point_maze::kTrajectorySteps; }
    std::size_t trajectory_dims() const override { return 2; }
    EpisodeResult evaluate(const Genotype& genotype) const override { return point_maze_episode(genotype); }
};

} // namespace uqd

#endif
