#include "currmask/net.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "currmask/errors.hpp"
#include "currmask/rng.hpp"

namespace currmask {

void NetConfig::validate() const {
    if (state_dim == 0 || action_dim == 0) {
        throw ConfigError("net: state and action dimensions must be positive");
    }
    if (hidden == 0 || heads == 0 || hidden % heads != 0) {
        throw ConfigError("net: hidden width must be a positive multiple of the head count");
    }
    if (encoder_layers == 0 || decoder_layers == 0 || ffn_multiplier == 0) {
        throw ConfigError("net: need at least one encoder and one decoder layer");
    }
    if (context_tokens < 2 || context_tokens % 2 != 0) {
        throw ConfigError("net: context_tokens must be even and >= 2");
    }
}

namespace {

constexpr double kLayerNormEps = 1e-5;

// Offset/shape of a tensor in the flat blob.
struct Ref {
    std::size_t off = 0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
};

struct LayerRefs {
    Ref ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
};

}  // namespace

template <typename Scalar>
struct MaskedPredictionNet<Scalar>::Impl {
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using ColVec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
    using MapM = Eigen::Map<Mat>;
    using CMapM = Eigen::Map<const Mat>;
    using CMapRow = Eigen::Map<const RowVec>;

    struct LnCache {
        Mat xhat;
        ColVec rstd;
    };

    struct LayerCache {
        Mat x, h1, q, k, v, o, x1, h2, u, t, g;  // t = tanh term of the GELU
        LnCache ln1, ln2;
        std::vector<Mat> probs;  // per segment, per head
    };

    // Contiguous row ranges that attend among themselves (one per window).
    struct Segments {
        std::vector<Eigen::Index> offset;
        std::vector<Eigen::Index> length;
    };

    struct Workspace {
        Eigen::Index batch = 0;
        Eigen::Index tokens = 0;  // L
        Segments enc_segs, dec_segs;
        std::vector<Eigen::Index> enc_window, enc_token;  // per encoder row
        std::vector<Eigen::Index> dec_enc_row;            // per decoder row, -1 when masked
        Mat enc_state_in, enc_action_in;                  // raw visible tokens per encoder row (zero-padded by type)
        std::vector<LayerCache> enc, dec;
        LnCache enc_ln, dec_ln;
        Mat enc_pre_ln, z, dec_pre_ln, y;
        Mat ys, ya, pred_s, pred_a, target_s, target_a;
        ColVec weight_s, weight_a;  // per head row, 1 when the token counts towards the loss
        double count = 0.0;
    };

    Ref in_state, in_action, enc_pos, enc_mod;
    std::vector<LayerRefs> enc_layers;
    Ref enc_ln_g, enc_ln_b;
    Ref dec_embed, dec_embed_b, mask_token, dec_pos, dec_mod;
    std::vector<LayerRefs> dec_layers;
    Ref dec_ln_g, dec_ln_b;
    Ref head_s, head_s_b, head_a, head_a_b;

    Workspace train_ws;

    // ---- parameter access -------------------------------------------------------------
    static CMapM cm(const std::vector<Scalar>& blob, const Ref& r) {
        return CMapM(blob.data() + r.off, r.rows, r.cols);
    }
    static CMapRow crow(const std::vector<Scalar>& blob, const Ref& r) {
        return CMapRow(blob.data() + r.off, r.cols);
    }
    static MapM gm(std::vector<Scalar>& blob, const Ref& r) { return MapM(blob.data() + r.off, r.rows, r.cols); }

    // ---- primitives ---------------------------------------------------------------------
    static void ln_forward(const Mat& x, const CMapRow& g, const CMapRow& b, LnCache& c, Mat& y) {
        const Eigen::Index n = x.rows();
        const Eigen::Index h = x.cols();
        c.xhat.resize(n, h);
        c.rstd.resize(n);
        y.resize(n, h);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Scalar mean = x.row(i).mean();
            const Scalar var = (x.row(i).array() - mean).square().mean();
            const Scalar rstd = Scalar(1) / std::sqrt(var + static_cast<Scalar>(kLayerNormEps));
            c.rstd[i] = rstd;
            c.xhat.row(i) = (x.row(i).array() - mean) * rstd;
        }
        y = (c.xhat.array().rowwise() * g.array()).rowwise() + b.array();
    }

    static Mat ln_backward(const Mat& dy, const LnCache& c, const CMapRow& g, MapM dg, MapM db) {
        const Eigen::Index n = dy.rows();
        const Scalar h = static_cast<Scalar>(dy.cols());
        // Column sums go through owned (aligned) rows: reducing straight into a Map over the
        // blob picks an alignment-dependent summation order.
        const RowVec sg = (dy.array() * c.xhat.array()).colwise().sum().matrix();
        const RowVec sb = dy.colwise().sum();
        dg += sg;
        db += sb;
        const Mat dxhat = dy.array().rowwise() * g.array();
        Mat dx(n, dy.cols());
        for (Eigen::Index i = 0; i < n; ++i) {
            const Scalar s1 = dxhat.row(i).sum();
            const Scalar s2 = dxhat.row(i).dot(c.xhat.row(i));
            dx.row(i) = (c.rstd[i] / h) * (h * dxhat.row(i).array() - s1 - c.xhat.row(i).array() * s2);
        }
        return dx;
    }

    // tanh-approximated GELU; `t` keeps the tanh term for the backward pass.
    static constexpr double kGeluC = 0.044715;

    static void gelu(const Mat& u, Mat& t, Mat& g) {
        const Scalar k = static_cast<Scalar>(std::sqrt(2.0 / std::numbers::pi));
        t = (k * (u.array() + Scalar(kGeluC) * u.array().cube())).tanh();
        g = Scalar(0.5) * u.array() * (Scalar(1) + t.array());
    }

    static Mat gelu_backward(const Mat& u, const Mat& t, const Mat& dg) {
        const Scalar k = static_cast<Scalar>(std::sqrt(2.0 / std::numbers::pi));
        return dg.array() * (Scalar(0.5) * (Scalar(1) + t.array()) +
                             Scalar(0.5) * u.array() * (Scalar(1) - t.array().square()) * k *
                                 (Scalar(1) + Scalar(3 * kGeluC) * u.array().square()));
    }

    static void linear(const Mat& x, const std::vector<Scalar>& p, const Ref& w, const Ref& b, Mat& y) {
        y.noalias() = x * cm(p, w);
        y.rowwise() += crow(p, b);
    }

    static Mat linear_backward(const Mat& x, const Mat& dy, const std::vector<Scalar>& p, std::vector<Scalar>& g,
                               const Ref& w, const Ref& b) {
        const Mat dw = x.transpose() * dy;
        gm(g, w) += dw;
        const RowVec sb = dy.colwise().sum();
        gm(g, b) += sb;
        Mat dx;
        dx.noalias() = dy * cm(p, w).transpose();
        return dx;
    }

    static void attention_forward(const Mat& q, const Mat& k, const Mat& v, const Segments& segs,
                                  std::size_t heads, std::vector<Mat>& probs, Mat& out) {
        const Eigen::Index dh = q.cols() / static_cast<Eigen::Index>(heads);
        const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
        out.setZero(q.rows(), q.cols());
        probs.resize(segs.offset.size() * heads);
        for (std::size_t s = 0; s < segs.offset.size(); ++s) {
            const Eigen::Index o = segs.offset[s];
            const Eigen::Index n = segs.length[s];
            if (n == 0) {
                continue;
            }
            for (std::size_t h = 0; h < heads; ++h) {
                const Eigen::Index c0 = static_cast<Eigen::Index>(h) * dh;
                Mat& p = probs[s * heads + h];
                p.noalias() = (q.block(o, c0, n, dh) * k.block(o, c0, n, dh).transpose()) * scale;
                for (Eigen::Index i = 0; i < n; ++i) {
                    const Scalar mx = p.row(i).maxCoeff();
                    p.row(i) = (p.row(i).array() - mx).exp();
                    p.row(i) /= p.row(i).sum();
                }
                out.block(o, c0, n, dh).noalias() = p * v.block(o, c0, n, dh);
            }
        }
    }

    static void attention_backward(const Mat& dout, const LayerCache& c, const Segments& segs, std::size_t heads,
                                   Mat& dq, Mat& dk, Mat& dv) {
        const Eigen::Index dh = c.q.cols() / static_cast<Eigen::Index>(heads);
        const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
        dq.setZero(c.q.rows(), c.q.cols());
        dk.setZero(c.k.rows(), c.k.cols());
        dv.setZero(c.v.rows(), c.v.cols());
        for (std::size_t s = 0; s < segs.offset.size(); ++s) {
            const Eigen::Index o = segs.offset[s];
            const Eigen::Index n = segs.length[s];
            if (n == 0) {
                continue;
            }
            for (std::size_t h = 0; h < heads; ++h) {
                const Eigen::Index c0 = static_cast<Eigen::Index>(h) * dh;
                const Mat& p = c.probs[s * heads + h];
                const auto d_o = dout.block(o, c0, n, dh);
                Mat dp;
                dp.noalias() = d_o * c.v.block(o, c0, n, dh).transpose();
                dv.block(o, c0, n, dh).noalias() += p.transpose() * d_o;
                const ColVec row_dot = (dp.array() * p.array()).rowwise().sum();
                const Mat ds = (p.array() * (dp.colwise() - row_dot).array()).matrix() * scale;
                dq.block(o, c0, n, dh).noalias() += ds * c.k.block(o, c0, n, dh);
                dk.block(o, c0, n, dh).noalias() += ds.transpose() * c.q.block(o, c0, n, dh);
            }
        }
    }

    static void layer_forward(const std::vector<Scalar>& p, const LayerRefs& r, const Mat& x, const Segments& segs,
                              std::size_t heads, LayerCache& c, Mat& out) {
        c.x = x;
        ln_forward(x, crow(p, r.ln1_g), crow(p, r.ln1_b), c.ln1, c.h1);
        linear(c.h1, p, r.wq, r.bq, c.q);
        linear(c.h1, p, r.wk, r.bk, c.k);
        linear(c.h1, p, r.wv, r.bv, c.v);
        attention_forward(c.q, c.k, c.v, segs, heads, c.probs, c.o);
        Mat attn;
        linear(c.o, p, r.wo, r.bo, attn);
        c.x1 = x + attn;
        ln_forward(c.x1, crow(p, r.ln2_g), crow(p, r.ln2_b), c.ln2, c.h2);
        linear(c.h2, p, r.w1, r.b1, c.u);
        gelu(c.u, c.t, c.g);
        Mat f;
        linear(c.g, p, r.w2, r.b2, f);
        out = c.x1 + f;
    }

    static Mat layer_backward(const std::vector<Scalar>& p, std::vector<Scalar>& g, const LayerRefs& r,
                              const LayerCache& c, const Segments& segs, std::size_t heads, const Mat& dout) {
        const Mat dgelu = linear_backward(c.g, dout, p, g, r.w2, r.b2);
        const Mat du = gelu_backward(c.u, c.t, dgelu);
        const Mat dh2 = linear_backward(c.h2, du, p, g, r.w1, r.b1);
        const Mat dx1 = dout + ln_backward(dh2, c.ln2, crow(p, r.ln2_g), gm(g, r.ln2_g), gm(g, r.ln2_b));
        const Mat d_o = linear_backward(c.o, dx1, p, g, r.wo, r.bo);
        Mat dq, dk, dv;
        attention_backward(d_o, c, segs, heads, dq, dk, dv);
        Mat dh1 = linear_backward(c.h1, dq, p, g, r.wq, r.bq);
        dh1 += linear_backward(c.h1, dk, p, g, r.wk, r.bk);
        dh1 += linear_backward(c.h1, dv, p, g, r.wv, r.bv);
        return dx1 + ln_backward(dh1, c.ln1, crow(p, r.ln1_g), gm(g, r.ln1_g), gm(g, r.ln1_b));
    }

    // ---- whole network ------------------------------------------------------------------
    void check_inputs(const NetConfig& cfg, const std::vector<Window>& windows,
                      const std::vector<MaskMatrix>& masks) const {
        if (windows.empty() || windows.size() != masks.size()) {
            throw ShapeError("net: need one mask per window and a non-empty batch");
        }
        const std::size_t w = windows.front().timesteps();
        if (w == 0 || 2 * w > cfg.context_tokens) {
            throw ShapeError("net: window of " + std::to_string(2 * w) + " tokens exceeds context of " +
                             std::to_string(cfg.context_tokens));
        }
        for (std::size_t i = 0; i < windows.size(); ++i) {
            const Window& win = windows[i];
            if (win.timesteps() != w || static_cast<std::size_t>(win.states.cols()) != cfg.state_dim ||
                static_cast<std::size_t>(win.actions.cols()) != cfg.action_dim ||
                static_cast<std::size_t>(win.actions.rows()) != w) {
                throw ShapeError("net: window shapes differ within batch or from the configured dimensions");
            }
            if (masks[i].size() != 2 * w) {
                throw ShapeError("net: mask length differs from window token count");
            }
        }
    }

    double forward(const NetConfig& cfg, const std::vector<Scalar>& p, const std::vector<Window>& windows,
                   const std::vector<MaskMatrix>& masks, Workspace& ws) const {
        check_inputs(cfg, windows, masks);
        const auto hidden = static_cast<Eigen::Index>(cfg.hidden);
        const auto ds = static_cast<Eigen::Index>(cfg.state_dim);
        const auto da = static_cast<Eigen::Index>(cfg.action_dim);
        const auto batch = static_cast<Eigen::Index>(windows.size());
        const auto w = static_cast<Eigen::Index>(windows.front().timesteps());
        const Eigen::Index tokens = 2 * w;
        ws.batch = batch;
        ws.tokens = tokens;

        // Encoder layout: visible tokens of each window, in token order.
        ws.enc_segs.offset.clear();
        ws.enc_segs.length.clear();
        ws.enc_window.clear();
        ws.enc_token.clear();
        ws.dec_enc_row.assign(static_cast<std::size_t>(batch * tokens), -1);
        for (Eigen::Index b = 0; b < batch; ++b) {
            ws.enc_segs.offset.push_back(static_cast<Eigen::Index>(ws.enc_token.size()));
            const MaskMatrix& m = masks[static_cast<std::size_t>(b)];
            for (Eigen::Index t = 0; t < tokens; ++t) {
                if (m.visible(static_cast<std::size_t>(t))) {
                    ws.dec_enc_row[static_cast<std::size_t>(b * tokens + t)] =
                        static_cast<Eigen::Index>(ws.enc_token.size());
                    ws.enc_window.push_back(b);
                    ws.enc_token.push_back(t);
                }
            }
            ws.enc_segs.length.push_back(static_cast<Eigen::Index>(ws.enc_token.size()) - ws.enc_segs.offset.back());
        }
        const auto n_enc = static_cast<Eigen::Index>(ws.enc_token.size());

        // Encoder embedding.
        ws.enc_state_in.setZero(n_enc, ds);
        ws.enc_action_in.setZero(n_enc, da);
        Mat x(n_enc, hidden);
        const CMapM w_s = cm(p, in_state);
        const CMapM w_a = cm(p, in_action);
        const CMapM pos_e = cm(p, enc_pos);
        const CMapM mod_e = cm(p, enc_mod);
        for (Eigen::Index r = 0; r < n_enc; ++r) {
            const Window& win = windows[static_cast<std::size_t>(ws.enc_window[static_cast<std::size_t>(r)])];
            const Eigen::Index t = ws.enc_token[static_cast<std::size_t>(r)];
            if (t % 2 == 0) {
                ws.enc_state_in.row(r) = win.states.row(t / 2).template cast<Scalar>();
                x.row(r).noalias() = ws.enc_state_in.row(r) * w_s;
                x.row(r) += mod_e.row(0);
            } else {
                ws.enc_action_in.row(r) = win.actions.row(t / 2).template cast<Scalar>();
                x.row(r).noalias() = ws.enc_action_in.row(r) * w_a;
                x.row(r) += mod_e.row(1);
            }
            x.row(r) += pos_e.row(t);
        }

        ws.enc.resize(enc_layers.size());
        for (std::size_t l = 0; l < enc_layers.size(); ++l) {
            Mat out;
            layer_forward(p, enc_layers[l], x, ws.enc_segs, cfg.heads, ws.enc[l], out);
            x.swap(out);
        }
        ws.enc_pre_ln = x;
        ln_forward(ws.enc_pre_ln, crow(p, enc_ln_g), crow(p, enc_ln_b), ws.enc_ln, ws.z);

        // Decoder grid: projected encoder outputs at visible slots, mask embedding elsewhere.
        Mat e;
        linear(ws.z, p, dec_embed, dec_embed_b, e);
        ws.dec_segs.offset.clear();
        ws.dec_segs.length.clear();
        Mat xd(batch * tokens, hidden);
        const CMapRow mask_emb = crow(p, mask_token);
        const CMapM pos_d = cm(p, dec_pos);
        const CMapM mod_d = cm(p, dec_mod);
        for (Eigen::Index b = 0; b < batch; ++b) {
            ws.dec_segs.offset.push_back(b * tokens);
            ws.dec_segs.length.push_back(tokens);
            for (Eigen::Index t = 0; t < tokens; ++t) {
                const Eigen::Index row = b * tokens + t;
                const Eigen::Index er = ws.dec_enc_row[static_cast<std::size_t>(row)];
                if (er >= 0) {
                    xd.row(row) = e.row(er);
                } else {
                    xd.row(row) = mask_emb;
                }
                xd.row(row) += pos_d.row(t) + mod_d.row(t % 2);
            }
        }
        ws.dec.resize(dec_layers.size());
        for (std::size_t l = 0; l < dec_layers.size(); ++l) {
            Mat out;
            layer_forward(p, dec_layers[l], xd, ws.dec_segs, cfg.heads, ws.dec[l], out);
            xd.swap(out);
        }
        ws.dec_pre_ln = xd;
        ln_forward(ws.dec_pre_ln, crow(p, dec_ln_g), crow(p, dec_ln_b), ws.dec_ln, ws.y);

        // Heads.
        ws.ys.resize(batch * w, hidden);
        ws.ya.resize(batch * w, hidden);
        ws.target_s.resize(batch * w, ds);
        ws.target_a.resize(batch * w, da);
        ws.weight_s.setOnes(batch * w);
        ws.weight_a.setOnes(batch * w);
        for (Eigen::Index b = 0; b < batch; ++b) {
            const Window& win = windows[static_cast<std::size_t>(b)];
            const MaskMatrix& m = masks[static_cast<std::size_t>(b)];
            for (Eigen::Index t = 0; t < w; ++t) {
                const Eigen::Index r = b * w + t;
                ws.ys.row(r) = ws.y.row(b * tokens + 2 * t);
                ws.ya.row(r) = ws.y.row(b * tokens + 2 * t + 1);
                if (cfg.masked_only_loss) {
                    ws.weight_s[r] = m.masked(static_cast<std::size_t>(2 * t)) ? Scalar(1) : Scalar(0);
                    ws.weight_a[r] = m.masked(static_cast<std::size_t>(2 * t + 1)) ? Scalar(1) : Scalar(0);
                }
                // Targets at visible tokens only matter when the loss covers them; masked
                // targets feed the loss but never the forward pass.
                ws.target_s.row(r) = win.states.row(t).template cast<Scalar>();
                ws.target_a.row(r) = win.actions.row(t).template cast<Scalar>();
            }
        }
        linear(ws.ys, p, head_s, head_s_b, ws.pred_s);
        linear(ws.ya, p, head_a, head_a_b, ws.pred_a);

        ws.count = static_cast<double>(ws.weight_s.sum()) * static_cast<double>(ds) +
                   static_cast<double>(ws.weight_a.sum()) * static_cast<double>(da);
        if (ws.count == 0.0) {
            return 0.0;
        }
        const double se_s = static_cast<double>(
            ((ws.pred_s - ws.target_s).array().square().rowwise().sum() * ws.weight_s.array()).sum());
        const double se_a = static_cast<double>(
            ((ws.pred_a - ws.target_a).array().square().rowwise().sum() * ws.weight_a.array()).sum());
        return (se_s + se_a) / ws.count;
    }

    void backward(const NetConfig& cfg, const std::vector<Scalar>& p, std::vector<Scalar>& g, Workspace& ws) const {
        std::fill(g.begin(), g.end(), Scalar(0));
        if (ws.count == 0.0) {
            return;
        }
        const auto hidden = static_cast<Eigen::Index>(cfg.hidden);
        const Eigen::Index tokens = ws.tokens;
        const Eigen::Index w = tokens / 2;
        const Scalar scale = static_cast<Scalar>(2.0 / ws.count);
        const Mat dpred_s = ((ws.pred_s - ws.target_s).array().colwise() * ws.weight_s.array()).matrix() * scale;
        const Mat dpred_a = ((ws.pred_a - ws.target_a).array().colwise() * ws.weight_a.array()).matrix() * scale;
        const Mat dys = linear_backward(ws.ys, dpred_s, p, g, head_s, head_s_b);
        const Mat dya = linear_backward(ws.ya, dpred_a, p, g, head_a, head_a_b);
        Mat dy = Mat::Zero(ws.batch * tokens, hidden);
        for (Eigen::Index b = 0; b < ws.batch; ++b) {
            for (Eigen::Index t = 0; t < w; ++t) {
                dy.row(b * tokens + 2 * t) = dys.row(b * w + t);
                dy.row(b * tokens + 2 * t + 1) = dya.row(b * w + t);
            }
        }
        Mat dx = ln_backward(dy, ws.dec_ln, crow(p, dec_ln_g), gm(g, dec_ln_g), gm(g, dec_ln_b));
        for (std::size_t l = dec_layers.size(); l-- > 0;) {
            dx = layer_backward(p, g, dec_layers[l], ws.dec[l], ws.dec_segs, cfg.heads, dx);
        }

        // Decoder grid scatter.
        const auto n_enc = static_cast<Eigen::Index>(ws.enc_token.size());
        Mat de = Mat::Zero(n_enc, hidden);
        MapM g_mask = gm(g, mask_token);
        MapM g_pos_d = gm(g, dec_pos);
        MapM g_mod_d = gm(g, dec_mod);
        for (Eigen::Index b = 0; b < ws.batch; ++b) {
            for (Eigen::Index t = 0; t < tokens; ++t) {
                const Eigen::Index row = b * tokens + t;
                g_pos_d.row(t) += dx.row(row);
                g_mod_d.row(t % 2) += dx.row(row);
                const Eigen::Index er = ws.dec_enc_row[static_cast<std::size_t>(row)];
                if (er >= 0) {
                    de.row(er) = dx.row(row);
                } else {
                    g_mask += dx.row(row);
                }
            }
        }
        if (n_enc == 0) {
            return;
        }
        const Mat dz = linear_backward(ws.z, de, p, g, dec_embed, dec_embed_b);
        Mat dxe = ln_backward(dz, ws.enc_ln, crow(p, enc_ln_g), gm(g, enc_ln_g), gm(g, enc_ln_b));
        for (std::size_t l = enc_layers.size(); l-- > 0;) {
            dxe = layer_backward(p, g, enc_layers[l], ws.enc[l], ws.enc_segs, cfg.heads, dxe);
        }
        MapM g_ws = gm(g, in_state);
        MapM g_wa = gm(g, in_action);
        MapM g_pos_e = gm(g, enc_pos);
        MapM g_mod_e = gm(g, enc_mod);
        for (Eigen::Index r = 0; r < n_enc; ++r) {
            const Eigen::Index t = ws.enc_token[static_cast<std::size_t>(r)];
            g_pos_e.row(t) += dxe.row(r);
            if (t % 2 == 0) {
                const Mat outer = ws.enc_state_in.row(r).transpose() * dxe.row(r);
                g_ws += outer;
                g_mod_e.row(0) += dxe.row(r);
            } else {
                const Mat outer = ws.enc_action_in.row(r).transpose() * dxe.row(r);
                g_wa += outer;
                g_mod_e.row(1) += dxe.row(r);
            }
        }
    }
};

namespace {

template <typename Scalar>
struct Builder {
    std::vector<ParamEntry>& table;
    std::size_t total = 0;

    Ref add(const std::string& name, std::size_t rows, std::size_t cols) {
        table.push_back(ParamEntry{name, total, rows, cols});
        Ref r{total, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
        total += rows * cols;
        return r;
    }

    LayerRefs layer(const std::string& prefix, std::size_t h, std::size_t f) {
        LayerRefs r;
        r.ln1_g = add(prefix + ".ln1.gain", 1, h);
        r.ln1_b = add(prefix + ".ln1.bias", 1, h);
        r.wq = add(prefix + ".attn.wq", h, h);
        r.bq = add(prefix + ".attn.bq", 1, h);
        r.wk = add(prefix + ".attn.wk", h, h);
        r.bk = add(prefix + ".attn.bk", 1, h);
        r.wv = add(prefix + ".attn.wv", h, h);
        r.bv = add(prefix + ".attn.bv", 1, h);
        r.wo = add(prefix + ".attn.wo", h, h);
        r.bo = add(prefix + ".attn.bo", 1, h);
        r.ln2_g = add(prefix + ".ln2.gain", 1, h);
        r.ln2_b = add(prefix + ".ln2.bias", 1, h);
        r.w1 = add(prefix + ".ffn.w1", h, f);
        r.b1 = add(prefix + ".ffn.b1", 1, f);
        r.w2 = add(prefix + ".ffn.w2", f, h);
        r.b2 = add(prefix + ".ffn.b2", 1, h);
        return r;
    }
};

}  // namespace

template <typename Scalar>
MaskedPredictionNet<Scalar>::MaskedPredictionNet(const NetConfig& config, std::uint64_t seed)
    : config_(config), impl_(std::make_unique<Impl>()) {
    config_.validate();
    const std::size_t h = config_.hidden;
    const std::size_t f = config_.hidden * config_.ffn_multiplier;
    const std::size_t ctx = config_.context_tokens;
    Builder<Scalar> b{table_};
    Impl& m = *impl_;
    m.in_state = b.add("encoder.in_state", config_.state_dim, h);
    m.in_action = b.add("encoder.in_action", config_.action_dim, h);
    m.enc_pos = b.add("encoder.position", ctx, h);
    m.enc_mod = b.add("encoder.modality", 2, h);
    for (std::size_t l = 0; l < config_.encoder_layers; ++l) {
        m.enc_layers.push_back(b.layer("encoder.layer" + std::to_string(l), h, f));
    }
    m.enc_ln_g = b.add("encoder.ln.gain", 1, h);
    m.enc_ln_b = b.add("encoder.ln.bias", 1, h);
    m.dec_embed = b.add("decoder.embed", h, h);
    m.dec_embed_b = b.add("decoder.embed_bias", 1, h);
    m.mask_token = b.add("decoder.mask_token", 1, h);
    m.dec_pos = b.add("decoder.position", ctx, h);
    m.dec_mod = b.add("decoder.modality", 2, h);
    for (std::size_t l = 0; l < config_.decoder_layers; ++l) {
        m.dec_layers.push_back(b.layer("decoder.layer" + std::to_string(l), h, f));
    }
    m.dec_ln_g = b.add("decoder.ln.gain", 1, h);
    m.dec_ln_b = b.add("decoder.ln.bias", 1, h);
    m.head_s = b.add("head.state", h, config_.state_dim);
    m.head_s_b = b.add("head.state_bias", 1, config_.state_dim);
    m.head_a = b.add("head.action", h, config_.action_dim);
    m.head_a_b = b.add("head.action_bias", 1, config_.action_dim);

    params_.assign(b.total, Scalar(0));
    grads_.assign(b.total, Scalar(0));

    // Xavier-normal matrices, N(0, 0.02) embeddings, unit LayerNorm gains, zero biases.
    Rng rng = make_rng(seed);
    for (const ParamEntry& e : table_) {
        const bool is_gain = e.name.ends_with(".gain");
        const bool is_bias = e.name.ends_with("bias") || e.name.ends_with(".bq") || e.name.ends_with(".bk") ||
                             e.name.ends_with(".bv") || e.name.ends_with(".bo") || e.name.ends_with(".b1") ||
                             e.name.ends_with(".b2");
        const bool is_embedding = e.name.ends_with("position") || e.name.ends_with("modality") ||
                                  e.name.ends_with("mask_token");
        for (std::size_t i = 0; i < e.size(); ++i) {
            Scalar v = Scalar(0);
            if (is_gain) {
                v = Scalar(1);
            } else if (is_embedding) {
                v = static_cast<Scalar>(0.02 * standard_normal(rng));
            } else if (!is_bias) {
                const double std = std::sqrt(2.0 / static_cast<double>(e.rows + e.cols));
                v = static_cast<Scalar>(std * standard_normal(rng));
            }
            params_[e.offset + i] = v;
        }
    }
}

template <typename Scalar>
MaskedPredictionNet<Scalar>::~MaskedPredictionNet() = default;

template <typename Scalar>
MaskedPredictionNet<Scalar>::MaskedPredictionNet(const MaskedPredictionNet& other)
    : config_(other.config_),
      table_(other.table_),
      params_(other.params_),
      grads_(other.grads_),
      impl_(std::make_unique<Impl>(*other.impl_)) {}

template <typename Scalar>
MaskedPredictionNet<Scalar>& MaskedPredictionNet<Scalar>::operator=(const MaskedPredictionNet& other) {
    if (this != &other) {
        MaskedPredictionNet copy(other);
        *this = std::move(copy);
    }
    return *this;
}

template <typename Scalar>
MaskedPredictionNet<Scalar>::MaskedPredictionNet(MaskedPredictionNet&&) noexcept = default;

template <typename Scalar>
MaskedPredictionNet<Scalar>& MaskedPredictionNet<Scalar>::operator=(MaskedPredictionNet&&) noexcept = default;

template <typename Scalar>
const ParamEntry& MaskedPredictionNet<Scalar>::entry(const std::string& name) const {
    for (const auto& e : table_) {
        if (e.name == name) {
            return e;
        }
    }
    throw ParameterError("no parameter named '" + name + "'");
}

template <typename Scalar>
double MaskedPredictionNet<Scalar>::loss(const std::vector<Window>& windows,
                                         const std::vector<MaskMatrix>& masks) const {
    typename Impl::Workspace ws;
    return impl_->forward(config_, params_, windows, masks, ws);
}

template <typename Scalar>
double MaskedPredictionNet<Scalar>::loss_and_gradient(const std::vector<Window>& windows,
                                                      const std::vector<MaskMatrix>& masks) {
    const double value = impl_->forward(config_, params_, windows, masks, impl_->train_ws);
    impl_->backward(config_, params_, grads_, impl_->train_ws);
    return value;
}

template <typename Scalar>
Window MaskedPredictionNet<Scalar>::reconstruct(const Window& window, const MaskMatrix& mask) const {
    typename Impl::Workspace ws;
    impl_->forward(config_, params_, {window}, {mask}, ws);
    Window out;
    out.start_index = window.start_index;
    out.states = ws.pred_s.template cast<float>();
    out.actions = ws.pred_a.template cast<float>();
    return out;
}

template class MaskedPredictionNet<float>;
template class MaskedPredictionNet<double>;

void adam_step(std::span<float> params, std::span<const float> grads, AdamState& state, const AdamConfig& cfg) {
    if (params.size() != grads.size()) {
        throw ShapeError("adam: parameter and gradient sizes differ");
    }
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0.0f);
        state.v.assign(params.size(), 0.0f);
    }
    ++state.step;
    const auto b1 = static_cast<float>(cfg.beta1);
    const auto b2 = static_cast<float>(cfg.beta2);
    const auto step = static_cast<double>(state.step);
    const auto c1 = static_cast<float>(1.0 - std::pow(cfg.beta1, step));
    const auto c2 = static_cast<float>(1.0 - std::pow(cfg.beta2, step));
    const auto lr = static_cast<float>(cfg.learning_rate);
    const auto eps = static_cast<float>(cfg.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const float gi = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0f - b1) * gi;
        state.v[i] = b2 * state.v[i] + (1.0f - b2) * gi * gi;
        const float mhat = state.m[i] / c1;
        const float vhat = state.v[i] / c2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace currmask
