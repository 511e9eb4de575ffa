#include "talm/experiments.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "talm/rng.hpp"

namespace talm {

const std::vector<std::string>& sweep_metric_columns() {
    static const std::vector<std::string> cols = {"1A", "2A", "2B", "2C", "2D", "3A", "3B",
                                                  "4A", "4B", "5A", "5B", "avg"};
    return cols;
}

zseval::EvalReport train_and_eval(const RunConfig& cfg, const PreparedData& data,
                                  const zseval::EvalContext& ectx, DataCache* cache) {
    const TwoStageResult trained =
        run_two_stage(data, cfg.encoder_config(), cfg.train_config(), cache);
    zseval::TrainedModel model(trained.params, cfg.features, data.vocab, cfg.coeffs.gamma);
    zseval::EvalReport report = zseval::run_all(ectx, model, cfg.eval_options());
    report.checkpoint_id = trained.report.checkpoint_id;
    report.config_fingerprint = cfg.fingerprint();
    return report;
}

SweepResult run_sweep(const RunConfig& base, int seeds) {
    if (seeds < 1) throw std::invalid_argument("run_sweep: seeds must be >= 1");

    const std::array<std::array<double, 4>, 4> corners = {{
        {0, 0, 0, 0},
        {1, 0, 1, 0},
        {0, 1, 0, 1},
        {1, 1, 1, 1},
    }};
    const std::array<std::string, 2> stage_modes = {"B", "AB"};

    SweepResult result;
    result.seeds = seeds;
    for (const std::string& stages : stage_modes) {
        for (const auto& corner : corners) {
            SweepCell cell;
            cell.alphas = corner;
            cell.beta = base.coeffs.beta;
            cell.stages = stages;
            result.cells.push_back(cell);
        }
    }

    // accumulate per cell x metric across seeds
    std::vector<std::map<std::string, std::vector<double>>> samples(result.cells.size());

    for (int s = 0; s < seeds; ++s) {
        RunConfig cfg = base;
        cfg.seed = base.seed + static_cast<std::uint64_t>(s);

        const PreparedData data =
            prepare_data(cfg.corpus_spec(), cfg.features, cfg.split_ratio, cfg.one_item_per_pair);
        const zseval::EvalContext ectx = zseval::build_eval_context(cfg.corpus_spec(), cfg.split_ratio);

        // The frozen weights depend only on the train sub-seed, which is the
        // same for every cell of this seed, so the cache can be shared.
        const EncoderParams init_params =
            EncoderParams::init(sub_seed(cfg.train_config().seed, "encoder-init"),
                                cfg.encoder_config());
        DataCache cache(data.spec, data.feat, data.vocab, init_params);

        for (std::size_t c = 0; c < result.cells.size(); ++c) {
            RunConfig cell_cfg = cfg;
            cell_cfg.stages = result.cells[c].stages;
            cell_cfg.coeffs.alpha_st = result.cells[c].alphas[0];
            cell_cfg.coeffs.alpha_ct = result.cells[c].alphas[1];
            cell_cfg.coeffs.alpha_so = result.cells[c].alphas[2];
            cell_cfg.coeffs.alpha_co = result.cells[c].alphas[3];

            const zseval::EvalReport report = train_and_eval(cell_cfg, data, ectx, &cache);
            double sum = 0.0;
            for (const auto& key : zseval::EvalReport::expected_keys()) {
                samples[c][key].push_back(report.acc.at(key));
                sum += report.acc.at(key);
            }
            samples[c]["avg"].push_back(sum /
                                        static_cast<double>(zseval::EvalReport::expected_keys().size()));
        }
    }

    for (std::size_t c = 0; c < result.cells.size(); ++c) {
        for (const auto& key : sweep_metric_columns()) {
            const std::vector<double>& xs = samples[c][key];
            double mean = 0.0;
            for (double x : xs) mean += x;
            mean /= static_cast<double>(xs.size());
            double var = 0.0;
            if (xs.size() > 1) {
                for (double x : xs) var += (x - mean) * (x - mean);
                var /= static_cast<double>(xs.size() - 1);
            }
            result.cells[c].mean[key] = mean;
            result.cells[c].stddev[key] = std::sqrt(var);
        }
    }
    return result;
}

std::string SweepResult::to_csv() const {
    std::ostringstream os;
    os << "alpha_st,alpha_ct,alpha_so,alpha_co,beta,stages";
    for (const auto& key : sweep_metric_columns()) os << ',' << key;
    if (seeds > 1)
        for (const auto& key : sweep_metric_columns()) os << ',' << key << "_std";
    os << '\n';
    for (const SweepCell& cell : cells) {
        os << cell.alphas[0] << ',' << cell.alphas[1] << ',' << cell.alphas[2] << ','
           << cell.alphas[3] << ',' << cell.beta << ',' << cell.stages;
        for (const auto& key : sweep_metric_columns()) os << ',' << cell.mean.at(key);
        if (seeds > 1)
            for (const auto& key : sweep_metric_columns()) os << ',' << cell.stddev.at(key);
        os << '\n';
    }
    return os.str();
}

}  // namespace talm
