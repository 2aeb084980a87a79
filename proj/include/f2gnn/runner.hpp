#pragma once

#include <string>
#include <vector>

#include "f2gnn/config.hpp"
#include "f2gnn/federation.hpp"

namespace f2gnn {

struct SeedOutcome {
    std::uint64_t split_seed = 0;
    MetricBundle global;        // final round, global test mask
    MetricBundle local;         // final round, median (or mean) over clients
    int rounds_run = 0;
};

struct RunSummary {
    RunMode mode = RunMode::federate;
    std::vector<SeedOutcome> seeds;

    double mean_global_accuracy() const;
    double mean_global_unfairness() const;  // mean of (delta_sp + delta_eo)
};

// Executes the configured mode and writes resolved_config.txt plus the
// mode's artifacts (rounds.jsonl, metrics.csv, model.ckpt, sweep.csv) into
// `out_dir`. Final files are written via temp-then-rename so a crash never
// leaves a partial artifact. Returns the in-memory summary.
RunSummary run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

// Writes `content` to `path` atomically (temp file + rename).
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace f2gnn
