#pragma once

#include <string>
#include <vector>

#include "cfris/power_pds.hpp"
#include "cfris/ris_pdd.hpp"

namespace cfris {

struct AoOptions {
    int max_rounds = 20;
    double tol = 1e-3;  // relative change of the frame-average sum-rate
    PddOptions pdd;
    PowerOptions power;
};

struct AoResult {
    PhaseConfig phases;
    std::vector<PowerAllocation> powers;  // one per coherence interval
    std::vector<double> trace;            // frame-average weighted sum-rate, initial point first
    int rounds = 0;
    bool converged = false;
    std::vector<std::string> notes;
};

// Frame-average instantaneous weighted sum-rate.
double frame_wsr(const std::vector<ChannelRealization>& reals, const PhaseConfig& phases,
                 const std::vector<PowerAllocation>& powers, const SystemConfig& cfg);

// Across-interval mean of the allocations.
PowerAllocation nominal_power(const std::vector<PowerAllocation>& powers);

AoResult alternating_optimize(const StatisticalCsi& stats, const std::vector<ChannelRealization>& reals,
                              const SystemConfig& cfg, const PhaseConfig& init, const AoOptions& opts);

PhaseConfig baseline_random_phases(const StatisticalCsi& stats, Seed seed);
PowerAllocation baseline_uniform_power(const ChannelRealization& real, const PhaseConfig& phases,
                                       const SystemConfig& cfg);

enum class Algorithm { Proposed, RandomPhases, UniformPower, RandomEverything, NoRis, DasLayout, CentralizedLayout };

std::string algorithm_name(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

enum class SweepAxis { None, M, N, PmaxDbm, KFactor, UeX, SnrDb };

std::string axis_name(SweepAxis a);
SweepAxis parse_axis(const std::string& name);

// Applies one sweep value to a configuration or layout.
void apply_sweep(SweepAxis axis, double value, SystemConfig& cfg, LayoutSpec& layout);

struct ExperimentSpec {
    SystemConfig base = default_config();
    LayoutSpec layout = LayoutSpec::uniform();
    SweepAxis axis = SweepAxis::None;
    std::vector<double> values{0.0};
    std::vector<Algorithm> algorithms{Algorithm::Proposed};
    int drops = 20;
    int intervals = 10;
    std::uint64_t seed = 1;
    int workers = 1;
    AoOptions ao;
    std::string output_path;

    void validate() const;
};

struct DropOutcome {
    double wsr = 0.0;
    int iterations = 0;
    bool failed = false;
    std::string message;
};

struct PointResult {
    double sweep_value = 0.0;
    Algorithm algorithm = Algorithm::Proposed;
    double mean_wsr = 0.0;
    double stderr_wsr = 0.0;
    double mean_iterations = 0.0;
    double wallclock_s = 0.0;
    int failures = 0;
    std::vector<DropOutcome> drops;
};

struct RunResult {
    std::vector<PointResult> points;
    int failures = 0;
    std::string csv(bool with_wallclock = true) const;
};

// One drop of one algorithm at one configuration.
DropOutcome run_drop(const SystemConfig& cfg, const LayoutSpec& layout, Algorithm algo, int intervals, Seed seed,
                     const AoOptions& ao);

RunResult run_experiment(const ExperimentSpec& spec);

// Configurations of the equal-aperture layout baselines.
SystemConfig das_config(const SystemConfig& cfg);
SystemConfig centralized_config(const SystemConfig& cfg);

}  // namespace cfris
