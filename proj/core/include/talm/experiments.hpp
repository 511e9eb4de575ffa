#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "talm/config.hpp"
#include "talm/zseval.hpp"

namespace talm {

/// One cell of the coefficient grid: the alpha corner, stage schedule and
/// per-metric seed statistics.
struct SweepCell {
    std::array<double, 4> alphas{};  // alpha_st, alpha_ct, alpha_so, alpha_co
    double beta = 1.0;
    std::string stages = "AB";
    std::map<std::string, double> mean;    // 11 task metrics + "avg"
    std::map<std::string, double> stddev;  // sample std; zero for a single seed
};

struct SweepResult {
    std::vector<SweepCell> cells;  // 8 rows: the single-stage block, then two-stage
    int seeds = 1;

    /// 12 metric columns (the 11 task accuracies plus their per-row mean),
    /// preceded by the config echo; _std columns follow when seeds > 1.
    std::string to_csv() const;
};

/// Columns of the metric grid, in emission order.
const std::vector<std::string>& sweep_metric_columns();

/// Train + evaluate one configuration end to end.
zseval::EvalReport train_and_eval(const RunConfig& cfg, const PreparedData& data,
                                  const zseval::EvalContext& ectx, DataCache* cache = nullptr);

/// The four alpha corners x {B, AB}, averaged over `seeds` seeded replicas
/// (global seeds base.seed, base.seed+1, ...). Corpora and frozen-path caches
/// are shared across the 8 cells of each seed.
SweepResult run_sweep(const RunConfig& base, int seeds);

}  // namespace talm
