#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "talm/encoder.hpp"
#include "talm/linalg.hpp"

namespace talm::loss {

/// Loss-family coefficients. The four alpha gates are binary under the
/// default protocol but stored as reals; gamma scales every dot product in
/// every term so the similarity definition and the objectives form one
/// system. `appendix_a5_form` switches the overlay accumulator to the variant
/// that adds the anchor's own positive inside the alpha_so bracket.
/// `cross_blocks=false` drops the cross-block accumulators entirely, reducing
/// each term to a plain softmax over its own block.
struct Coefficients {
    double alpha_st = 1.0;
    double alpha_ct = 1.0;
    double alpha_so = 1.0;
    double alpha_co = 1.0;
    double beta = 1.0;
    double beta_a = 1.0;
    double alpha_same = 1.0;
    double alpha_diff = 1.0;
    double gamma = 10.0;
    bool appendix_a5_form = false;
    bool cross_blocks = true;

    void validate() const;
};

/// C[i][j] = gamma * (z_c_i . z_a_j); text rows, audio columns.
Mat similarity_matrix(const Mat& z_c, const Mat& z_a, double gamma);

/// Second-stage embedding batch: index-aligned forward / reversed / overlaid
/// blocks, n rows per block, unit-norm rows.
struct StageBEmbeddings {
    Mat a_forward, a_reversed, a_overlaid;
    Mat c_forward, c_reversed, c_overlaid;

    std::size_t block_size() const { return a_forward.rows; }
    void validate() const;
};

/// First-stage embedding batch: singles + duals plus the class bookkeeping
/// the alpha_same / alpha_diff partition needs. Blocks may have different
/// sizes in degenerate test setups.
struct StageAEmbeddings {
    Mat a_singles, a_duals;
    Mat c_singles, c_duals;
    std::vector<int> single_classes;            // class per single row
    std::vector<std::array<int, 2>> dual_pairs;  // ordered pair per dual row

    void validate() const;
};

/// Per-anchor terms. `text_anchor=false` anchors audio rows against caption
/// candidates; true swaps the roles.
double forward_anchor_loss(std::size_t anchor, const StageBEmbeddings& b, const Coefficients& k,
                           bool text_anchor = false);
double reversed_anchor_loss(std::size_t anchor, const StageBEmbeddings& b, const Coefficients& k,
                            bool text_anchor = false);
double overlay_anchor_loss(std::size_t anchor, const StageBEmbeddings& b, const Coefficients& k,
                           bool text_anchor = false);
double single_anchor_loss(std::size_t anchor, const StageAEmbeddings& b, const Coefficients& k,
                          bool text_anchor = false);
double dual_anchor_loss(std::size_t anchor, const StageAEmbeddings& b, const Coefficients& k,
                        bool text_anchor = false);

/// L_B = L_cB + beta * L_aB summed over anchors, left-to-right by index.
double stage_b_loss(const StageBEmbeddings& b, const Coefficients& k);

/// L_A = L_cA + beta_A * L_aA.
double stage_a_loss(const StageAEmbeddings& b, const Coefficients& k);

// ---------------------------------------------------------------------------
// Item-level batches: frozen-base vectors per item, from which the trainable
// projections produce embeddings. This is the surface the trainer and the
// gradient checks operate on.
// ---------------------------------------------------------------------------

struct StageBItems {
    std::vector<Vec> a_forward, a_reversed, a_overlaid;  // audio base vectors
    std::vector<Vec> c_forward, c_reversed, c_overlaid;  // text base vectors
};

struct StageAItems {
    std::vector<Vec> a_singles, a_duals;
    std::vector<Vec> c_singles, c_duals;
    std::vector<int> single_classes;
    std::vector<std::array<int, 2>> dual_pairs;
};

StageBEmbeddings embed_stage_b(const StageBItems& items, const EncoderParams& p);
StageAEmbeddings embed_stage_a(const StageAItems& items, const EncoderParams& p);

double stage_b_loss_value(const StageBItems& items, const EncoderParams& p, const Coefficients& k);
double stage_a_loss_value(const StageAItems& items, const EncoderParams& p, const Coefficients& k);

/// Analytic gradient with respect to the trainable projections. Returns the
/// loss value; `out` must come from p.zero_grads().
double stage_b_grad(const StageBItems& items, const EncoderParams& p, const Coefficients& k,
                    TrainableGrads& out);
double stage_a_grad(const StageAItems& items, const EncoderParams& p, const Coefficients& k,
                    TrainableGrads& out);

/// Flat coordinate reference into the trainable tensors, in the fixed order
/// text_proj, text_bias, audio_proj, audio_bias.
struct CoordRef {
    int tensor = 0;
    std::size_t index = 0;
};

std::size_t trainable_coord_count(const EncoderParams& p);
double read_coord(const TrainableGrads& g, CoordRef c);
double read_coord(const EncoderParams& p, CoordRef c);
void write_coord(EncoderParams& p, CoordRef c, double value);
CoordRef coord_at(const EncoderParams& p, std::size_t flat);

/// Central finite difference (L(w+h) - L(w-h)) / 2h for one coordinate.
template <typename LossFn>
double finite_diff_coord(const LossFn& f, EncoderParams params, CoordRef c, double h) {
    const double w0 = read_coord(params, c);
    write_coord(params, c, w0 + h);
    const double up = f(params);
    write_coord(params, c, w0 - h);
    const double down = f(params);
    return (up - down) / (2.0 * h);
}

/// Full central-difference gradient (used on small test problems).
template <typename LossFn>
TrainableGrads finite_diff_grad(const LossFn& f, const EncoderParams& params, double h) {
    TrainableGrads g = params.zero_grads();
    const std::size_t n = trainable_coord_count(params);
    for (std::size_t flat = 0; flat < n; ++flat) {
        const CoordRef c = coord_at(params, flat);
        const double v = finite_diff_coord(f, params, c, h);
        switch (c.tensor) {
            case 0: g.d_text_proj.data[c.index] = v; break;
            case 1: g.d_text_bias[c.index] = v; break;
            case 2: g.d_audio_proj.data[c.index] = v; break;
            case 3: g.d_audio_bias[c.index] = v; break;
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Gradient verification runner
// ---------------------------------------------------------------------------

struct GradCheckSettings {
    std::size_t block_size = 4;  // n
    int embed_dim = 8;           // d
    std::size_t coords = 20;     // sampled trainable coordinates per config
    double step = 1e-6;          // h
    double tolerance = 1e-5;     // max relative error
};

struct GradCheckRow {
    std::string stage;  // "A" or "B"
    std::array<double, 4> alphas{};  // alpha_st, alpha_ct, alpha_so, alpha_co
    double max_rel_err = 0.0;
    bool pass = false;
};

struct GradCheckReport {
    std::vector<GradCheckRow> rows;
    double max_rel_err = 0.0;
    bool pass = false;
};

/// Max relative analytic-vs-central-difference error over sampled coordinates
/// for one configuration.
double grad_check_max_rel_err(char stage, const Coefficients& coeffs, std::uint64_t seed,
                              const GradCheckSettings& s, bool corrupt = false);

/// Runs the four alpha corners for both stages (stage-B rows cover both
/// overlay-accumulator forms) on self-contained seeded batches.
GradCheckReport run_grad_check(std::uint64_t seed, const GradCheckSettings& s = {},
                               bool corrupt = false);

}  // namespace talm::loss
