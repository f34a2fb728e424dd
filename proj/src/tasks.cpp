#include <mcaurora/tasks.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace mcaurora {

std::optional<std::size_t> TaskDefinition::channel_index(const std::string& channel) const
{
    for (std::size_t i = 0; i < channels.size(); ++i)
        if (channels[i].name == channel)
            return i;
    return std::nullopt;
}

ObservationMatrix window_average(const ObservationMatrix& steps, int window)
{
    if (window <= 0 || steps.timepoints() % static_cast<std::size_t>(window) != 0)
        throw StructuralError("episode length must be a multiple of the averaging window");
    const std::size_t w = static_cast<std::size_t>(window);
    ObservationMatrix out(steps.channels(), steps.timepoints() / w);
    for (std::size_t c = 0; c < steps.channels(); ++c)
        for (std::size_t t = 0; t < out.timepoints(); ++t) {
            double acc = 0.0;
            for (std::size_t k = 0; k < w; ++k)
                acc += steps.at(c, t * w + k);
            out.at(c, t) = acc / static_cast<double>(w);
        }
    return out;
}

namespace {

    double param_or(const TaskParams& p, const char* key, double fallback)
    {
        auto it = p.find(key);
        return it == p.end() ? fallback : it->second;
    }

    // Walker constants. Units are metres, seconds, and a unit hull mass.
    constexpr double gravity = 10.0;
    constexpr double hull_inertia = 0.15;
    constexpr double hull_half_length = 0.4;
    constexpr double angular_damping = 0.5;
    constexpr double thigh_length = 0.45;
    constexpr double shank_length = 0.45;
    constexpr double motor_gain = 60.0;
    constexpr double joint_damping = 8.0;
    constexpr double ground_stiffness = 1000.0;
    constexpr double ground_damping = 30.0;
    constexpr double ground_friction_damping = 40.0;
    constexpr double friction_coefficient = 1.0;
    constexpr double initial_height = 0.85;
    constexpr double initial_hip = 0.15;
    constexpr double fall_angle = 1.0;
    constexpr double fall_clearance = 0.3;
    constexpr double fall_penalty = -100.0;
    constexpr double torque_cost = 0.028;
    constexpr double pitch_shaping = 5.0;
    constexpr double terrain_step = 0.5;
    constexpr double flat_start = 2.0;

    constexpr std::array<Bounds, 4> joint_limits{{{-0.8, 1.1}, {-1.6, 0.0}, {-0.8, 1.1}, {-1.6, 0.0}}};

    enum Channel : std::size_t {
        Displacement,
        HullAngle,
        HullHeight,
        VelocityX,
        Hip0,
        Knee0,
        Hip1,
        Knee1,
        Effort,
        Contact0,
        Contact1,
        Airborne,
        ChannelCount
    };

    struct Terrain {
        double x0 = -5.0;
        std::vector<double> heights;

        double height(double x) const
        {
            const double u = (x - x0) / terrain_step;
            if (u <= 0.0)
                return heights.front();
            const std::size_t i = static_cast<std::size_t>(u);
            if (i + 1 >= heights.size())
                return heights.back();
            const double f = u - static_cast<double>(i);
            return heights[i] + (heights[i + 1] - heights[i]) * f;
        }
    };

    Terrain make_terrain(std::uint64_t seed, double arena_length, double max_slope, bool flat)
    {
        Terrain t;
        Rng rng(seed);
        const std::size_t n = static_cast<std::size_t>((arena_length + 15.0) / terrain_step) + 1;
        t.heights.resize(n, 0.0);
        for (std::size_t i = 1; i < n; ++i) {
            const double x = t.x0 + static_cast<double>(i) * terrain_step;
            const double slope = (flat || x <= flat_start) ? 0.0 : rng.uniform(-max_slope, max_slope);
            t.heights[i] = t.heights[i - 1] + slope * terrain_step;
        }
        return t;
    }

    struct WalkerState {
        double x = 0.0, y = 0.0, vx = 0.0, vy = 0.0, angle = 0.0, omega = 0.0;
        std::array<double, 4> q{initial_hip, 0.0, -initial_hip, 0.0};
        std::array<double, 4> qd{};

        bool finite() const
        {
            if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(vx) || !std::isfinite(vy) || !std::isfinite(angle)
                || !std::isfinite(omega))
                return false;
            for (std::size_t j = 0; j < 4; ++j)
                if (!std::isfinite(q[j]) || !std::isfinite(qd[j]))
                    return false;
            return true;
        }
    };

    std::array<double, 2> foot_position(const WalkerState& s, std::size_t leg)
    {
        const double thigh = s.angle + s.q[2 * leg];
        const double shank = thigh + s.q[2 * leg + 1];
        return {s.x + thigh_length * std::sin(thigh) + shank_length * std::sin(shank),
                s.y - thigh_length * std::cos(thigh) - shank_length * std::cos(shank)};
    }

    class Controller {
    public:
        Controller(std::span<const double> genome, int hidden) : _w(genome), _hidden(static_cast<std::size_t>(hidden)) {}

        std::array<double, 4> act(const std::array<double, SurrogateWalker::n_inputs>& in) const
        {
            constexpr std::size_t ni = SurrogateWalker::n_inputs;
            std::array<double, 64> h{};
            std::size_t k = 0;
            for (std::size_t j = 0; j < _hidden; ++j) {
                double acc = 0.0;
                for (std::size_t i = 0; i < ni; ++i)
                    acc += _w[k++] * in[i];
                acc += _w[k++];
                h[j] = std::tanh(acc);
            }
            std::array<double, 4> out{};
            for (std::size_t o = 0; o < 4; ++o) {
                double acc = 0.0;
                for (std::size_t j = 0; j < _hidden; ++j)
                    acc += _w[k++] * h[j];
                acc += _w[k++];
                out[o] = std::tanh(acc);
            }
            return out;
        }

    private:
        std::span<const double> _w;
        std::size_t _hidden;
    };

} // namespace

WalkerParams WalkerParams::from(const TaskParams& p)
{
    static const std::vector<std::string> known{"episodes_per_eval", "episode_length", "averaging_window", "hidden_units",
                                                "substeps",          "control_dt",     "arena_length",     "max_slope",
                                                "genome_bound"};
    for (const auto& [k, v] : p)
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw StructuralError("unknown walker parameter '" + k + "'");
    WalkerParams w;
    w.episodes_per_eval = static_cast<int>(param_or(p, "episodes_per_eval", w.episodes_per_eval));
    w.episode_length = static_cast<int>(param_or(p, "episode_length", w.episode_length));
    w.averaging_window = static_cast<int>(param_or(p, "averaging_window", w.averaging_window));
    w.hidden_units = static_cast<int>(param_or(p, "hidden_units", w.hidden_units));
    w.substeps = static_cast<int>(param_or(p, "substeps", w.substeps));
    w.control_dt = param_or(p, "control_dt", w.control_dt);
    w.arena_length = param_or(p, "arena_length", w.arena_length);
    w.max_slope = param_or(p, "max_slope", w.max_slope);
    w.genome_bound = param_or(p, "genome_bound", w.genome_bound);
    return w;
}

SurrogateWalker::SurrogateWalker(WalkerParams params) : _params(params)
{
    if (_params.episodes_per_eval < 1 || _params.episode_length < 1 || _params.substeps < 1)
        throw StructuralError("walker episode parameters must be positive");
    if (_params.averaging_window < 1 || _params.episode_length % _params.averaging_window != 0)
        throw StructuralError("walker episode length must be a multiple of the averaging window");
    if (_params.hidden_units < 1 || _params.hidden_units > 64)
        throw StructuralError("walker hidden units must lie in [1, 64]");

    _def.name = "walker";
    _def.genome_dim = genome_size(_params.hidden_units);
    _def.genome_bounds = {-_params.genome_bound, _params.genome_bound};
    _def.episodes_per_eval = _params.episodes_per_eval;
    _def.episode_length = _params.episode_length;
    _def.obs_averaging_window = _params.averaging_window;
    _def.n_timepoints = static_cast<std::size_t>(_params.episode_length / _params.averaging_window);
    const double horizon = _params.episode_length * _params.control_dt;
    const double max_progress = 300.0 / _params.arena_length * horizon;
    _def.fitness_bounds = {fall_penalty - 10.0, max_progress};
    _def.channels = {
        {"displacement", {-0.25 * horizon, horizon}},
        {"hull_angle", {-fall_angle, fall_angle}},
        {"hull_height", {0.0, thigh_length + shank_length}},
        {"velocity_x", {-1.5, 1.5}},
        {"hip_angle_0", joint_limits[0]},
        {"knee_angle_0", joint_limits[1]},
        {"hip_angle_1", joint_limits[2]},
        {"knee_angle_1", joint_limits[3]},
        {"effort", {0.0, 1.0}},
        {"contact_0", {0.0, 1.0}},
        {"contact_1", {0.0, 1.0}},
        {"airborne", {0.0, 1.0}},
    };
}

SurrogateWalker::Episode SurrogateWalker::run_episode(std::span<const double> genome, std::uint64_t terrain_seed, bool flat) const
{
    if (genome.size() != _def.genome_dim)
        throw StructuralError("walker genome has " + std::to_string(genome.size()) + " genes, expected "
                              + std::to_string(_def.genome_dim));
    const Terrain terrain = make_terrain(terrain_seed, _params.arena_length, _params.max_slope, flat);
    const Controller controller(genome, _params.hidden_units);
    const double dt = _params.control_dt / _params.substeps;
    const std::size_t steps = static_cast<std::size_t>(_params.episode_length);

    Episode ep;
    ep.steps = ObservationMatrix(ChannelCount, steps);

    WalkerState s;
    s.y = terrain.height(0.0) + initial_height;
    std::array<std::array<double, 2>, 2> prev_foot{foot_position(s, 0), foot_position(s, 1)};
    std::array<double, 2> contact{1.0, 1.0};
    double prev_pitch = 0.0;

    std::size_t t = 0;
    for (; t < steps; ++t) {
        const double ground = terrain.height(s.x);
        const std::array<double, n_inputs> in{s.angle,       0.5 * s.omega, s.vx,          s.vy,          2.0 * (s.y - ground - 0.8),
                                              s.q[0],        0.2 * s.qd[0], s.q[1],        0.2 * s.qd[1], s.q[2],
                                              0.2 * s.qd[2], s.q[3],        0.2 * s.qd[3], contact[0],    contact[1]};
        const auto action = controller.act(in);
        const double x_before = s.x;

        std::array<double, 2> contact_time{0.0, 0.0};
        for (int sub = 0; sub < _params.substeps; ++sub) {
            for (std::size_t j = 0; j < n_joints; ++j) {
                s.qd[j] += (motor_gain * action[j] - joint_damping * s.qd[j]) * dt;
                s.q[j] += s.qd[j] * dt;
                if (s.q[j] < joint_limits[j].lo) {
                    s.q[j] = joint_limits[j].lo;
                    s.qd[j] = std::max(s.qd[j], 0.0);
                }
                else if (s.q[j] > joint_limits[j].hi) {
                    s.q[j] = joint_limits[j].hi;
                    s.qd[j] = std::min(s.qd[j], 0.0);
                }
            }
            double fx = 0.0, fy = 0.0, torque = 0.0;
            for (std::size_t leg = 0; leg < 2; ++leg) {
                const auto foot = foot_position(s, leg);
                const double vfx = (foot[0] - prev_foot[leg][0]) / dt;
                const double vfy = (foot[1] - prev_foot[leg][1]) / dt;
                prev_foot[leg] = foot;
                const double depth = terrain.height(foot[0]) - foot[1];
                if (depth <= 0.0)
                    continue;
                contact_time[leg] += 1.0;
                const double normal = std::max(0.0, ground_stiffness * depth - ground_damping * vfy);
                const double limit = friction_coefficient * normal;
                const double tangential = std::clamp(-ground_friction_damping * vfx, -limit, limit);
                fx += tangential;
                fy += normal;
                torque += (foot[0] - s.x) * normal - (foot[1] - s.y) * tangential;
            }
            s.vx += fx * dt;
            s.vy += (fy - gravity) * dt;
            s.omega += (torque / hull_inertia - angular_damping * s.omega) * dt;
            s.x += s.vx * dt;
            s.y += s.vy * dt;
            s.angle += s.omega * dt;
        }
        for (std::size_t leg = 0; leg < 2; ++leg)
            contact[leg] = contact_time[leg] / _params.substeps;

        if (!s.finite()) {
            ep.blew_up = true;
            ep.fell = true;
            ep.reward += fall_penalty;
            break;
        }

        const double effort = (std::abs(action[0]) + std::abs(action[1]) + std::abs(action[2]) + std::abs(action[3])) / 4.0;
        ep.reward += 300.0 / _params.arena_length * (s.x - x_before);
        ep.reward -= pitch_shaping * (std::abs(s.angle) - std::abs(prev_pitch));
        ep.reward -= torque_cost * 4.0 * effort;
        prev_pitch = s.angle;

        ep.steps.at(Displacement, t) = s.x;
        ep.steps.at(HullAngle, t) = s.angle;
        ep.steps.at(HullHeight, t) = s.y - terrain.height(s.x);
        ep.steps.at(VelocityX, t) = s.vx;
        ep.steps.at(Hip0, t) = s.q[0];
        ep.steps.at(Knee0, t) = s.q[1];
        ep.steps.at(Hip1, t) = s.q[2];
        ep.steps.at(Knee1, t) = s.q[3];
        ep.steps.at(Effort, t) = effort;
        ep.steps.at(Contact0, t) = contact[0];
        ep.steps.at(Contact1, t) = contact[1];
        ep.steps.at(Airborne, t) = (contact[0] == 0.0 && contact[1] == 0.0) ? 1.0 : 0.0;

        const double hull_front = s.y + hull_half_length * std::sin(s.angle);
        const double hull_back = s.y - hull_half_length * std::sin(s.angle);
        const bool hull_down = hull_front < terrain.height(s.x + hull_half_length * std::cos(s.angle))
            || hull_back < terrain.height(s.x - hull_half_length * std::cos(s.angle));
        if (std::abs(s.angle) > fall_angle || s.y - terrain.height(s.x) < fall_clearance || hull_down) {
            ep.fell = true;
            ep.reward += fall_penalty;
            ++t;
            break;
        }
        if (s.x >= _params.arena_length) {
            ++t;
            break;
        }
    }

    // after termination the record holds the last pose, motionless and idle
    for (std::size_t r = t; r < steps; ++r)
        for (std::size_t c = 0; c < ChannelCount; ++c) {
            double v = r > 0 ? ep.steps.at(c, r - 1) : 0.0;
            if (c == VelocityX || c == Effort || c == Airborne)
                v = 0.0;
            ep.steps.at(c, r) = v;
        }
    if (t == 0 && ep.blew_up)
        for (std::size_t c = 0; c < ChannelCount; ++c)
            ep.steps.at(c, 0) = 0.0;
    return ep;
}

Evaluation SurrogateWalker::evaluate(std::span<const double> genome, Rng& substream) const
{
    Evaluation ev;
    ev.episode_count = _params.episodes_per_eval;
    ev.observations = ObservationMatrix(ChannelCount, _def.n_timepoints);
    double total = 0.0;
    for (int e = 0; e < _params.episodes_per_eval; ++e) {
        const auto ep = run_episode(genome, substream.next_u64());
        total += ep.reward;
        ev.flagged = ev.flagged || ep.blew_up;
        const auto avg = window_average(ep.steps, _params.averaging_window);
        for (std::size_t i = 0; i < avg.size(); ++i)
            ev.observations.flat()[i] += avg.flat()[i];
    }
    const double n = static_cast<double>(_params.episodes_per_eval);
    for (double& v : ev.observations.flat())
        v /= n;
    ev.fitness = total / n;
    return ev;
}

AnalyticToyTask::AnalyticToyTask(std::size_t timepoints)
{
    if (timepoints < 1)
        throw StructuralError("toy task needs at least one timepoint");
    _def.name = "toy";
    _def.genome_dim = 2;
    _def.genome_bounds = {-5.12, 5.12};
    _def.n_timepoints = timepoints;
    _def.episodes_per_eval = 1;
    _def.episode_length = static_cast<int>(timepoints);
    _def.obs_averaging_window = 1;
    _def.fitness_bounds = {-81.0, 0.0};
    _def.channels = {
        {"g1", {-5.12, 5.12}},
        {"g2", {-5.12, 5.12}},
        {"sum", {-10.24, 10.24}},
        {"diff", {-10.24, 10.24}},
    };
}

Evaluation AnalyticToyTask::evaluate(std::span<const double> genome, Rng&) const
{
    if (genome.size() != 2)
        throw StructuralError("toy task genome must have 2 genes");
    const double g1 = genome[0], g2 = genome[1];
    double rastrigin = 20.0;
    for (double g : genome)
        rastrigin += g * g - 10.0 * std::cos(2.0 * std::numbers::pi * g);

    Evaluation ev;
    ev.fitness = -rastrigin;
    ev.episode_count = 1;
    const std::size_t tp = _def.n_timepoints;
    ev.observations = ObservationMatrix(4, tp);
    const std::array<double, 4> base{g1, g2, g1 + g2, g1 - g2};
    for (std::size_t c = 0; c < 4; ++c)
        for (std::size_t t = 0; t < tp; ++t)
            ev.observations.at(c, t) = base[c] * static_cast<double>(t + 1) / static_cast<double>(tp);
    return ev;
}

std::shared_ptr<const Task> make_task(const std::string& name, const TaskParams& params)
{
    if (name == "walker")
        return std::make_shared<SurrogateWalker>(WalkerParams::from(params));
    if (name == "toy") {
        for (const auto& [k, v] : params)
            if (k != "timepoints")
                throw StructuralError("unknown toy task parameter '" + k + "'");
        return std::make_shared<AnalyticToyTask>(static_cast<std::size_t>(param_or(params, "timepoints", 10)));
    }
    throw StructuralError("unknown task '" + name + "'");
}

} // namespace mcaurora
