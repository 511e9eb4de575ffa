#include "talm/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "talm/rng.hpp"

namespace talm::loss {

namespace {

void require_unit_rows(const Mat& m, const char* who) {
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double n = std::sqrt(dot(m.row(r), m.row(r), m.cols));
        if (!std::isfinite(n) || std::fabs(n - 1.0) > 1e-6)
            throw std::invalid_argument(std::string(who) + ": rows must be unit-norm and finite");
    }
}

/// One denominator entry: candidate row, its weight, and (optionally) the
/// gradient row the backward pass accumulates into.
struct Term {
    const double* z = nullptr;
    double* dz = nullptr;
    double w = 1.0;
};

/// -log( exp(l_pos) / sum_t w_t exp(l_t) ) with l = gamma * dot(anchor, z_t),
/// computed with max subtraction. When d_anchor is non-null, gradients scaled
/// by `scale` are accumulated into d_anchor and the terms' dz rows.
double anchor_term(const double* anchor, double* d_anchor, const std::vector<Term>& terms,
                   std::size_t pos, double gamma, std::size_t d, double scale) {
    std::vector<double> logits(terms.size());
    double max_logit = -1e300;
    for (std::size_t t = 0; t < terms.size(); ++t) {
        logits[t] = gamma * dot(anchor, terms[t].z, d);
        max_logit = std::max(max_logit, logits[t]);
    }
    double denom = 0.0;
    for (std::size_t t = 0; t < terms.size(); ++t)
        denom += terms[t].w * std::exp(logits[t] - max_logit);
    const double value = -logits[pos] + max_logit + std::log(denom);

    if (d_anchor != nullptr) {
        for (std::size_t t = 0; t < terms.size(); ++t) {
            const double p = terms[t].w * std::exp(logits[t] - max_logit) / denom;
            const double g = scale * (p - (t == pos ? 1.0 : 0.0));
            if (g == 0.0) continue;
            axpy(g * gamma, terms[t].z, d_anchor, d);
            if (terms[t].dz != nullptr) axpy(g * gamma, anchor, terms[t].dz, d);
        }
    }
    if (!std::isfinite(value)) throw std::runtime_error("loss: non-finite anchor term");
    return value;
}

/// View that presents either (audio anchors, caption candidates) or the
/// transpose, with optional aligned gradient matrices.
struct BlockView {
    const Mat* anchors;
    const Mat* cands;
    Mat* d_anchors = nullptr;
    Mat* d_cands = nullptr;
};

struct StageBView {
    BlockView fwd, rev, ovl;
    std::size_t d;
};

StageBView make_view(const StageBEmbeddings& b, bool text_anchor, Mat* da_f, Mat* da_r, Mat* da_o,
                     Mat* dc_f, Mat* dc_r, Mat* dc_o) {
    StageBView v;
    v.d = b.a_forward.cols;
    if (!text_anchor) {
        v.fwd = {&b.a_forward, &b.c_forward, da_f, dc_f};
        v.rev = {&b.a_reversed, &b.c_reversed, da_r, dc_r};
        v.ovl = {&b.a_overlaid, &b.c_overlaid, da_o, dc_o};
    } else {
        v.fwd = {&b.c_forward, &b.a_forward, dc_f, da_f};
        v.rev = {&b.c_reversed, &b.a_reversed, dc_r, da_r};
        v.ovl = {&b.c_overlaid, &b.a_overlaid, dc_o, da_o};
    }
    return v;
}

double* grad_row(Mat* m, std::size_t r) { return m == nullptr ? nullptr : m->row(r); }

void push(std::vector<Term>& terms, const BlockView& blk, std::size_t row, double w) {
    if (w == 0.0) return;
    terms.push_back({blk.cands->row(row), grad_row(blk.d_cands, row), w});
}

double forward_term(const StageBView& v, std::size_t i, const Coefficients& k, double scale,
                    bool want_grad) {
    const std::size_t n = v.fwd.anchors->rows;
    std::vector<Term> terms;
    terms.reserve(3 * n + 1);
    for (std::size_t j = 0; j < n; ++j) push(terms, v.fwd, j, 1.0);
    const std::size_t pos = i;
    if (k.cross_blocks) {
        if (k.appendix_a5_form) push(terms, v.fwd, i, k.alpha_so);
        push(terms, v.rev, i, k.alpha_st);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) push(terms, v.rev, j, k.alpha_ct);
        push(terms, v.ovl, i, k.alpha_so);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) push(terms, v.ovl, j, k.alpha_co);
    }
    return anchor_term(v.fwd.anchors->row(i), want_grad ? grad_row(v.fwd.d_anchors, i) : nullptr,
                       terms, pos, k.gamma, v.d, scale);
}

double reversed_term(const StageBView& v, std::size_t i, const Coefficients& k, double scale,
                     bool want_grad) {
    const std::size_t n = v.rev.anchors->rows;
    std::vector<Term> terms;
    terms.reserve(3 * n + 1);
    for (std::size_t j = 0; j < n; ++j) push(terms, v.rev, j, 1.0);
    const std::size_t pos = i;
    if (k.cross_blocks) {
        if (k.appendix_a5_form) push(terms, v.rev, i, k.alpha_so);
        push(terms, v.fwd, i, k.alpha_st);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) push(terms, v.fwd, j, k.alpha_ct);
        push(terms, v.ovl, i, k.alpha_so);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) push(terms, v.ovl, j, k.alpha_co);
    }
    return anchor_term(v.rev.anchors->row(i), want_grad ? grad_row(v.rev.d_anchors, i) : nullptr,
                       terms, pos, k.gamma, v.d, scale);
}

double overlay_term(const StageBView& v, std::size_t i, const Coefficients& k, double scale,
                    bool want_grad) {
    const std::size_t n = v.ovl.anchors->rows;
    std::vector<Term> terms;
    terms.reserve(3 * n);
    for (std::size_t j = 0; j < n; ++j) push(terms, v.ovl, j, 1.0);
    const std::size_t pos = i;
    if (k.cross_blocks) {
        // The forward entries of this accumulator carry no alpha gate.
        push(terms, v.fwd, i, 1.0);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) push(terms, v.fwd, j, 1.0);
        push(terms, v.rev, i, k.alpha_st);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) push(terms, v.rev, j, k.alpha_ct);
    }
    return anchor_term(v.ovl.anchors->row(i), want_grad ? grad_row(v.ovl.d_anchors, i) : nullptr,
                       terms, pos, k.gamma, v.d, scale);
}

struct StageAView {
    BlockView singles, duals;
    std::size_t d;
};

StageAView make_view_a(const StageAEmbeddings& b, bool text_anchor, Mat* da_s, Mat* da_d,
                       Mat* dc_s, Mat* dc_d) {
    StageAView v;
    v.d = b.a_singles.cols > 0 ? b.a_singles.cols : b.a_duals.cols;
    if (!text_anchor) {
        v.singles = {&b.a_singles, &b.c_singles, da_s, dc_s};
        v.duals = {&b.a_duals, &b.c_duals, da_d, dc_d};
    } else {
        v.singles = {&b.c_singles, &b.a_singles, dc_s, da_s};
        v.duals = {&b.c_duals, &b.a_duals, dc_d, da_d};
    }
    return v;
}

bool shares_class(int cls, const std::array<int, 2>& pair) {
    return cls == pair[0] || cls == pair[1];
}

double single_term(const StageAView& v, const StageAEmbeddings& b, std::size_t i,
                   const Coefficients& k, double scale, bool want_grad) {
    const std::size_t ns = v.singles.anchors->rows;
    const std::size_t nd = v.duals.cands->rows;
    std::vector<Term> terms;
    terms.reserve(ns + nd);
    for (std::size_t j = 0; j < ns; ++j) push(terms, v.singles, j, 1.0);
    if (k.cross_blocks) {
        for (std::size_t j = 0; j < nd; ++j)
            push(terms, v.duals, j,
                 shares_class(b.single_classes[i], b.dual_pairs[j]) ? k.alpha_same : k.alpha_diff);
    }
    return anchor_term(v.singles.anchors->row(i),
                       want_grad ? grad_row(v.singles.d_anchors, i) : nullptr, terms, i, k.gamma,
                       v.d, scale);
}

double dual_term(const StageAView& v, const StageAEmbeddings& b, std::size_t i,
                 const Coefficients& k, double scale, bool want_grad) {
    const std::size_t nd = v.duals.anchors->rows;
    const std::size_t ns = v.singles.cands->rows;
    std::vector<Term> terms;
    terms.reserve(ns + nd);
    for (std::size_t j = 0; j < nd; ++j) push(terms, v.duals, j, 1.0);
    if (k.cross_blocks) {
        for (std::size_t j = 0; j < ns; ++j)
            push(terms, v.singles, j,
                 shares_class(b.single_classes[j], b.dual_pairs[i]) ? k.alpha_same : k.alpha_diff);
    }
    return anchor_term(v.duals.anchors->row(i),
                       want_grad ? grad_row(v.duals.d_anchors, i) : nullptr, terms, i, k.gamma,
                       v.d, scale);
}

}  // namespace

void Coefficients::validate() const {
    if (!(gamma > 0.0)) throw std::invalid_argument("Coefficients: gamma must be positive");
    for (double a : {alpha_st, alpha_ct, alpha_so, alpha_co, beta, beta_a, alpha_same, alpha_diff})
        if (a < 0.0 || !std::isfinite(a))
            throw std::invalid_argument("Coefficients: weights must be non-negative and finite");
}

Mat similarity_matrix(const Mat& z_c, const Mat& z_a, double gamma) {
    if (z_c.cols != z_a.cols) throw std::invalid_argument("similarity_matrix: dim mismatch");
    Mat out(z_c.rows, z_a.rows, 0.0);
    for (std::size_t i = 0; i < z_c.rows; ++i)
        for (std::size_t j = 0; j < z_a.rows; ++j)
            out.at(i, j) = gamma * dot(z_c.row(i), z_a.row(j), z_c.cols);
    return out;
}

void StageBEmbeddings::validate() const {
    const std::size_t n = a_forward.rows, d = a_forward.cols;
    const Mat* mats[6] = {&a_forward, &a_reversed, &a_overlaid, &c_forward, &c_reversed, &c_overlaid};
    for (const Mat* m : mats) {
        if (m->rows != n || m->cols != d)
            throw std::invalid_argument("StageBEmbeddings: block shape mismatch");
        require_unit_rows(*m, "StageBEmbeddings");
    }
}

void StageAEmbeddings::validate() const {
    if (a_singles.rows != c_singles.rows || a_duals.rows != c_duals.rows)
        throw std::invalid_argument("StageAEmbeddings: audio/text block sizes differ");
    if (single_classes.size() != a_singles.rows || dual_pairs.size() != a_duals.rows)
        throw std::invalid_argument("StageAEmbeddings: metadata size mismatch");
    for (const Mat* m : {&a_singles, &a_duals, &c_singles, &c_duals})
        require_unit_rows(*m, "StageAEmbeddings");
}

double forward_anchor_loss(std::size_t anchor, const StageBEmbeddings& b, const Coefficients& k,
                           bool text_anchor) {
    k.validate();
    auto v = make_view(b, text_anchor, nullptr, nullptr, nullptr, nullptr, nullptr, nullptr);
    return forward_term(v, anchor, k, 1.0, false);
}

double reversed_anchor_loss(std::size_t anchor, const StageBEmbeddings& b, const Coefficients& k,
                            bool text_anchor) {
    k.validate();
    auto v = make_view(b, text_anchor, nullptr, nullptr, nullptr, nullptr, nullptr, nullptr);
    return reversed_term(v, anchor, k, 1.0, false);
}

double overlay_anchor_loss(std::size_t anchor, const StageBEmbeddings& b, const Coefficients& k,
                           bool text_anchor) {
    k.validate();
    auto v = make_view(b, text_anchor, nullptr, nullptr, nullptr, nullptr, nullptr, nullptr);
    return overlay_term(v, anchor, k, 1.0, false);
}

double single_anchor_loss(std::size_t anchor, const StageAEmbeddings& b, const Coefficients& k,
                          bool text_anchor) {
    k.validate();
    auto v = make_view_a(b, text_anchor, nullptr, nullptr, nullptr, nullptr);
    return single_term(v, b, anchor, k, 1.0, false);
}

double dual_anchor_loss(std::size_t anchor, const StageAEmbeddings& b, const Coefficients& k,
                        bool text_anchor) {
    k.validate();
    auto v = make_view_a(b, text_anchor, nullptr, nullptr, nullptr, nullptr);
    return dual_term(v, b, anchor, k, 1.0, false);
}

namespace {

struct StageBGradMats {
    Mat da_f, da_r, da_o, dc_f, dc_r, dc_o;
    explicit StageBGradMats(const StageBEmbeddings& b)
        : da_f(b.a_forward.rows, b.a_forward.cols, 0.0),
          da_r(b.a_forward.rows, b.a_forward.cols, 0.0),
          da_o(b.a_forward.rows, b.a_forward.cols, 0.0),
          dc_f(b.a_forward.rows, b.a_forward.cols, 0.0),
          dc_r(b.a_forward.rows, b.a_forward.cols, 0.0),
          dc_o(b.a_forward.rows, b.a_forward.cols, 0.0) {}
};

double stage_b_core(const StageBEmbeddings& b, const Coefficients& k, StageBGradMats* g) {
    b.validate();
    k.validate();
    const std::size_t n = b.block_size();
    const bool want = g != nullptr;

    auto va = make_view(b, false, want ? &g->da_f : nullptr, want ? &g->da_r : nullptr,
                        want ? &g->da_o : nullptr, want ? &g->dc_f : nullptr,
                        want ? &g->dc_r : nullptr, want ? &g->dc_o : nullptr);
    double l_cb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        l_cb += forward_term(va, i, k, 1.0, want);
        l_cb += reversed_term(va, i, k, 1.0, want);
        l_cb += overlay_term(va, i, k, 1.0, want);
    }

    auto vc = make_view(b, true, want ? &g->da_f : nullptr, want ? &g->da_r : nullptr,
                        want ? &g->da_o : nullptr, want ? &g->dc_f : nullptr,
                        want ? &g->dc_r : nullptr, want ? &g->dc_o : nullptr);
    double l_ab = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        l_ab += forward_term(vc, i, k, k.beta, want);
        l_ab += reversed_term(vc, i, k, k.beta, want);
        l_ab += overlay_term(vc, i, k, k.beta, want);
    }
    return l_cb + k.beta * l_ab;
}

struct StageAGradMats {
    Mat da_s, da_d, dc_s, dc_d;
    explicit StageAGradMats(const StageAEmbeddings& b)
        : da_s(b.a_singles.rows, b.a_singles.cols, 0.0),
          da_d(b.a_duals.rows, b.a_duals.cols, 0.0),
          dc_s(b.c_singles.rows, b.c_singles.cols, 0.0),
          dc_d(b.c_duals.rows, b.c_duals.cols, 0.0) {}
};

double stage_a_core(const StageAEmbeddings& b, const Coefficients& k, StageAGradMats* g) {
    b.validate();
    k.validate();
    const bool want = g != nullptr;

    auto va = make_view_a(b, false, want ? &g->da_s : nullptr, want ? &g->da_d : nullptr,
                          want ? &g->dc_s : nullptr, want ? &g->dc_d : nullptr);
    double l_ca = 0.0;
    for (std::size_t i = 0; i < b.a_singles.rows; ++i) l_ca += single_term(va, b, i, k, 1.0, want);
    for (std::size_t i = 0; i < b.a_duals.rows; ++i) l_ca += dual_term(va, b, i, k, 1.0, want);

    auto vc = make_view_a(b, true, want ? &g->da_s : nullptr, want ? &g->da_d : nullptr,
                          want ? &g->dc_s : nullptr, want ? &g->dc_d : nullptr);
    double l_aa = 0.0;
    for (std::size_t i = 0; i < b.c_singles.rows; ++i)
        l_aa += single_term(vc, b, i, k, k.beta_a, want);
    for (std::size_t i = 0; i < b.c_duals.rows; ++i) l_aa += dual_term(vc, b, i, k, k.beta_a, want);

    return l_ca + k.beta_a * l_aa;
}

}  // namespace

double stage_b_loss(const StageBEmbeddings& b, const Coefficients& k) {
    return stage_b_core(b, k, nullptr);
}

double stage_a_loss(const StageAEmbeddings& b, const Coefficients& k) {
    return stage_a_core(b, k, nullptr);
}

// ---------------------------------------------------------------------------
// Item-level forward + backward through projection and normalization
// ---------------------------------------------------------------------------

namespace {

struct EncodedBlock {
    std::vector<double> norms;  // pre-normalization norms per row
};

Mat embed_block(const std::vector<Vec>& bases, const Mat& proj, const Vec& bias,
                EncodedBlock* info) {
    Mat out(bases.size(), proj.rows, 0.0);
    if (info) info->norms.resize(bases.size());
    for (std::size_t r = 0; r < bases.size(); ++r) {
        if (!all_finite(bases[r])) throw std::runtime_error("embed_block: non-finite base vector");
        Vec e = matvec(proj, bases[r]);
        for (std::size_t i = 0; i < e.size(); ++i) e[i] += bias[i];
        const double n = l2_norm(e);
        if (!(n > 1e-12)) throw std::domain_error("embed_block: zero-norm vector before normalization");
        if (info) info->norms[r] = n;
        for (std::size_t i = 0; i < e.size(); ++i) out.at(r, i) = e[i] / n;
    }
    return out;
}

/// dz -> de -> (d_proj, d_bias) for one block of rows.
void backprop_block(const std::vector<Vec>& bases, const Mat& z, const EncodedBlock& info,
                    const Mat& dz, Mat& d_proj, Vec& d_bias) {
    const std::size_t d = z.cols;
    Vec de(d);
    for (std::size_t r = 0; r < bases.size(); ++r) {
        const double* zr = z.row(r);
        const double* dzr = dz.row(r);
        const double proj_comp = dot(dzr, zr, d);
        for (std::size_t i = 0; i < d; ++i) de[i] = (dzr[i] - proj_comp * zr[i]) / info.norms[r];
        outer_acc(d_proj, 1.0, de, bases[r]);
        for (std::size_t i = 0; i < d; ++i) d_bias[i] += de[i];
    }
}

}  // namespace

StageBEmbeddings embed_stage_b(const StageBItems& items, const EncoderParams& p) {
    StageBEmbeddings b;
    b.a_forward = embed_block(items.a_forward, p.audio_proj(), p.audio_bias(), nullptr);
    b.a_reversed = embed_block(items.a_reversed, p.audio_proj(), p.audio_bias(), nullptr);
    b.a_overlaid = embed_block(items.a_overlaid, p.audio_proj(), p.audio_bias(), nullptr);
    b.c_forward = embed_block(items.c_forward, p.text_proj(), p.text_bias(), nullptr);
    b.c_reversed = embed_block(items.c_reversed, p.text_proj(), p.text_bias(), nullptr);
    b.c_overlaid = embed_block(items.c_overlaid, p.text_proj(), p.text_bias(), nullptr);
    return b;
}

StageAEmbeddings embed_stage_a(const StageAItems& items, const EncoderParams& p) {
    StageAEmbeddings b;
    b.a_singles = embed_block(items.a_singles, p.audio_proj(), p.audio_bias(), nullptr);
    b.a_duals = embed_block(items.a_duals, p.audio_proj(), p.audio_bias(), nullptr);
    b.c_singles = embed_block(items.c_singles, p.text_proj(), p.text_bias(), nullptr);
    b.c_duals = embed_block(items.c_duals, p.text_proj(), p.text_bias(), nullptr);
    b.single_classes = items.single_classes;
    b.dual_pairs = items.dual_pairs;
    if (b.a_singles.cols == 0 && b.a_singles.rows == 0)
        b.a_singles = Mat(0, static_cast<std::size_t>(p.config().embed_dim));
    return b;
}

double stage_b_loss_value(const StageBItems& items, const EncoderParams& p,
                          const Coefficients& k) {
    return stage_b_loss(embed_stage_b(items, p), k);
}

double stage_a_loss_value(const StageAItems& items, const EncoderParams& p,
                          const Coefficients& k) {
    return stage_a_loss(embed_stage_a(items, p), k);
}

double stage_b_grad(const StageBItems& items, const EncoderParams& p, const Coefficients& k,
                    TrainableGrads& out) {
    StageBEmbeddings b;
    EncodedBlock inf_af, inf_ar, inf_ao, inf_cf, inf_cr, inf_co;
    b.a_forward = embed_block(items.a_forward, p.audio_proj(), p.audio_bias(), &inf_af);
    b.a_reversed = embed_block(items.a_reversed, p.audio_proj(), p.audio_bias(), &inf_ar);
    b.a_overlaid = embed_block(items.a_overlaid, p.audio_proj(), p.audio_bias(), &inf_ao);
    b.c_forward = embed_block(items.c_forward, p.text_proj(), p.text_bias(), &inf_cf);
    b.c_reversed = embed_block(items.c_reversed, p.text_proj(), p.text_bias(), &inf_cr);
    b.c_overlaid = embed_block(items.c_overlaid, p.text_proj(), p.text_bias(), &inf_co);

    StageBGradMats g(b);
    const double value = stage_b_core(b, k, &g);

    backprop_block(items.a_forward, b.a_forward, inf_af, g.da_f, out.d_audio_proj, out.d_audio_bias);
    backprop_block(items.a_reversed, b.a_reversed, inf_ar, g.da_r, out.d_audio_proj, out.d_audio_bias);
    backprop_block(items.a_overlaid, b.a_overlaid, inf_ao, g.da_o, out.d_audio_proj, out.d_audio_bias);
    backprop_block(items.c_forward, b.c_forward, inf_cf, g.dc_f, out.d_text_proj, out.d_text_bias);
    backprop_block(items.c_reversed, b.c_reversed, inf_cr, g.dc_r, out.d_text_proj, out.d_text_bias);
    backprop_block(items.c_overlaid, b.c_overlaid, inf_co, g.dc_o, out.d_text_proj, out.d_text_bias);
    return value;
}

double stage_a_grad(const StageAItems& items, const EncoderParams& p, const Coefficients& k,
                    TrainableGrads& out) {
    StageAEmbeddings b;
    EncodedBlock inf_as, inf_ad, inf_cs, inf_cd;
    b.a_singles = embed_block(items.a_singles, p.audio_proj(), p.audio_bias(), &inf_as);
    b.a_duals = embed_block(items.a_duals, p.audio_proj(), p.audio_bias(), &inf_ad);
    b.c_singles = embed_block(items.c_singles, p.text_proj(), p.text_bias(), &inf_cs);
    b.c_duals = embed_block(items.c_duals, p.text_proj(), p.text_bias(), &inf_cd);
    b.single_classes = items.single_classes;
    b.dual_pairs = items.dual_pairs;

    StageAGradMats g(b);
    const double value = stage_a_core(b, k, &g);

    backprop_block(items.a_singles, b.a_singles, inf_as, g.da_s, out.d_audio_proj, out.d_audio_bias);
    backprop_block(items.a_duals, b.a_duals, inf_ad, g.da_d, out.d_audio_proj, out.d_audio_bias);
    backprop_block(items.c_singles, b.c_singles, inf_cs, g.dc_s, out.d_text_proj, out.d_text_bias);
    backprop_block(items.c_duals, b.c_duals, inf_cd, g.dc_d, out.d_text_proj, out.d_text_bias);
    return value;
}

// ---------------------------------------------------------------------------
// Coordinate plumbing for finite differences
// ---------------------------------------------------------------------------

std::size_t trainable_coord_count(const EncoderParams& p) {
    return p.text_proj().size() + p.text_bias().size() + p.audio_proj().size() +
           p.audio_bias().size();
}

CoordRef coord_at(const EncoderParams& p, std::size_t flat) {
    const std::size_t sizes[4] = {p.text_proj().size(), p.text_bias().size(),
                                  p.audio_proj().size(), p.audio_bias().size()};
    for (int t = 0; t < 4; ++t) {
        if (flat < sizes[t]) return {t, flat};
        flat -= sizes[t];
    }
    throw std::out_of_range("coord_at: flat index out of range");
}

double read_coord(const TrainableGrads& g, CoordRef c) {
    switch (c.tensor) {
        case 0: return g.d_text_proj.data[c.index];
        case 1: return g.d_text_bias[c.index];
        case 2: return g.d_audio_proj.data[c.index];
        case 3: return g.d_audio_bias[c.index];
    }
    throw std::out_of_range("read_coord: bad tensor");
}

double read_coord(const EncoderParams& p, CoordRef c) {
    switch (c.tensor) {
        case 0: return p.text_proj().data[c.index];
        case 1: return p.text_bias()[c.index];
        case 2: return p.audio_proj().data[c.index];
        case 3: return p.audio_bias()[c.index];
    }
    throw std::out_of_range("read_coord: bad tensor");
}

void write_coord(EncoderParams& p, CoordRef c, double value) {
    switch (c.tensor) {
        case 0: p.text_proj().data[c.index] = value; return;
        case 1: p.text_bias()[c.index] = value; return;
        case 2: p.audio_proj().data[c.index] = value; return;
        case 3: p.audio_bias()[c.index] = value; return;
    }
    throw std::out_of_range("write_coord: bad tensor");
}

// ---------------------------------------------------------------------------
// Gradient verification runner
// ---------------------------------------------------------------------------

namespace {

Vec random_base(Rng& rng, std::size_t dim) {
    Vec v(dim);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

StageBItems random_stage_b_items(Rng& rng, std::size_t n, const EncoderConfig& cfg) {
    StageBItems items;
    const auto db = static_cast<std::size_t>(cfg.base_dim);
    for (std::size_t i = 0; i < n; ++i) {
        items.a_forward.push_back(random_base(rng, db));
        items.a_reversed.push_back(random_base(rng, db));
        items.a_overlaid.push_back(random_base(rng, db));
        items.c_forward.push_back(random_base(rng, 2 * db));
        items.c_reversed.push_back(random_base(rng, 2 * db));
        items.c_overlaid.push_back(random_base(rng, 2 * db));
    }
    return items;
}

StageAItems random_stage_a_items(Rng& rng, std::size_t n, const EncoderConfig& cfg) {
    StageAItems items;
    const auto db = static_cast<std::size_t>(cfg.base_dim);
    const int num_classes = 6;
    for (std::size_t i = 0; i < n; ++i) {
        items.a_singles.push_back(random_base(rng, db));
        items.a_duals.push_back(random_base(rng, db));
        items.c_singles.push_back(random_base(rng, 2 * db));
        items.c_duals.push_back(random_base(rng, 2 * db));
        items.single_classes.push_back(static_cast<int>(rng.below(num_classes)));
        const int a = static_cast<int>(rng.below(num_classes));
        int b = static_cast<int>(rng.below(num_classes - 1));
        if (b >= a) ++b;
        items.dual_pairs.push_back({a, b});
    }
    return items;
}

}  // namespace

double grad_check_max_rel_err(char stage, const Coefficients& coeffs, std::uint64_t seed,
                              const GradCheckSettings& s, bool corrupt) {
    EncoderConfig cfg;
    cfg.embed_dim = s.embed_dim;
    cfg.base_dim = 16;
    cfg.hidden_dim = 32;
    cfg.vocab_capacity = 64;
    cfg.num_bands = 8;

    Rng rng(sub_seed(seed, stage == 'A' ? "grad-check-a" : "grad-check-b"));
    EncoderParams params = EncoderParams::init(rng.next_u64(), cfg);

    StageAItems items_a;
    StageBItems items_b;
    if (stage == 'A')
        items_a = random_stage_a_items(rng, s.block_size, cfg);
    else
        items_b = random_stage_b_items(rng, s.block_size, cfg);

    auto loss_of = [&](const EncoderParams& p) {
        return stage == 'A' ? stage_a_loss_value(items_a, p, coeffs)
                            : stage_b_loss_value(items_b, p, coeffs);
    };

    TrainableGrads analytic = params.zero_grads();
    if (stage == 'A')
        stage_a_grad(items_a, params, coeffs, analytic);
    else
        stage_b_grad(items_b, params, coeffs, analytic);
    if (corrupt) analytic.d_text_proj.data[0] += 0.05;

    double max_err = 0.0;
    const std::size_t total = trainable_coord_count(params);
    for (std::size_t c = 0; c < s.coords; ++c) {
        const CoordRef ref = coord_at(params, rng.below(total));
        const double g_fd = finite_diff_coord(loss_of, params, ref, s.step);
        const double g_an = read_coord(analytic, ref);
        const double denom = std::max({1e-8, std::fabs(g_fd), std::fabs(g_an)});
        max_err = std::max(max_err, std::fabs(g_fd - g_an) / denom);
    }
    return max_err;
}

GradCheckReport run_grad_check(std::uint64_t seed, const GradCheckSettings& s, bool corrupt) {
    const std::array<std::array<double, 4>, 4> corners = {{
        {0, 0, 0, 0},
        {1, 0, 1, 0},
        {0, 1, 0, 1},
        {1, 1, 1, 1},
    }};
    GradCheckReport report;
    for (const auto& corner : corners) {
        for (char stage : {'A', 'B'}) {
            Coefficients k;
            k.alpha_st = corner[0];
            k.alpha_ct = corner[1];
            k.alpha_so = corner[2];
            k.alpha_co = corner[3];
            double err = grad_check_max_rel_err(stage, k, seed, s, corrupt);
            if (stage == 'B') {
                Coefficients k5 = k;
                k5.appendix_a5_form = true;
                err = std::max(err, grad_check_max_rel_err(stage, k5, seed, s, corrupt));
            }
            GradCheckRow row;
            row.stage = std::string(1, stage);
            row.alphas = corner;
            row.max_rel_err = err;
            row.pass = err <= s.tolerance;
            report.max_rel_err = std::max(report.max_rel_err, err);
            report.rows.push_back(row);
        }
    }
    report.pass = true;
    for (const auto& r : report.rows) report.pass = report.pass && r.pass;
    return report;
}

}  // namespace talm::loss
