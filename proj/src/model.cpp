#include "barber/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "barber/rng.hpp"

namespace barber {

namespace {

Matrix col_slice(const Matrix &a, int c0, int width) {
    Matrix out(a.rows, width);
    for (int r = 0; r < a.rows; ++r) {
        for (int c = 0; c < width; ++c) {
            out.at(r, c) = a.at(r, c0 + c);
        }
    }
    return out;
}

void set_cols(Matrix &dst, int c0, const Matrix &src) {
    for (int r = 0; r < src.rows; ++r) {
        for (int c = 0; c < src.cols; ++c) {
            dst.at(r, c0 + c) = src.at(r, c);
        }
    }
}

Matrix activation_forward(Activation act, const Matrix &u) {
    return act == Activation::silu ? silu(u) : gelu(u);
}

Matrix activation_derivative(Activation act, const Matrix &u) {
    Matrix out(u.rows, u.cols);
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double x = u.data[i];
        if (act == Activation::silu) {
            const double s = 1.0 / (1.0 + std::exp(-x));
            out.data[i] = s * (1.0 + x * (1.0 - s));
        } else {
            const double cdf = 0.5 * (1.0 + std::erf(x * 0.7071067811865475244));
            const double pdf = std::exp(-0.5 * x * x) * 0.3989422804014326779;
            out.data[i] = cdf + x * pdf;
        }
    }
    return out;
}

struct AttnCache {
    Matrix xn, q, k, v, ctx;
    std::vector<Matrix> probs; // one (T x T) per head
};

struct MlpCache {
    Matrix xn, u, a;
};

// xt is tokens-as-rows (T x d_model); weights are the effective (masked) ones
Matrix attention_forward_rows(const AttentionBlockWeights &blk, const Matrix &wq, const Matrix &wk,
                              const Matrix &wv, const Matrix &wo, const Matrix &xt, AttnCache *cache) {
    const int d = wq.rows;
    const int n_heads = blk.n_heads;
    const int d_head = d / n_heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_head));
    const int t = xt.rows;

    Matrix xn = rmsnorm_rows(xt, blk.norm_gain);
    Matrix q = matmul(xn, transpose(wq));
    Matrix k = matmul(xn, transpose(wk));
    Matrix v = matmul(xn, transpose(wv));

    Matrix ctx(t, d);
    std::vector<Matrix> probs;
    probs.reserve(static_cast<std::size_t>(n_heads));
    for (int h = 0; h < n_heads; ++h) {
        const int c0 = h * d_head;
        Matrix qh = col_slice(q, c0, d_head);
        Matrix kh = col_slice(k, c0, d_head);
        Matrix vh = col_slice(v, c0, d_head);
        Matrix s = scale(matmul(qh, transpose(kh)), inv_sqrt);
        for (int i = 0; i < t; ++i) { // causal mask over the token axis
            for (int j = i + 1; j < t; ++j) {
                s.at(i, j) = -std::numeric_limits<double>::infinity();
            }
        }
        Matrix p = softmax_rows(s);
        set_cols(ctx, c0, matmul(p, vh));
        probs.push_back(std::move(p));
    }

    Matrix out = add(xt, matmul(ctx, transpose(wo)));
    if (cache != nullptr) {
        cache->xn = std::move(xn);
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->ctx = std::move(ctx);
        cache->probs = std::move(probs);
    }
    return out;
}

Matrix mlp_forward_rows(const MlpBlockWeights &blk, const Matrix &wup, const Matrix &wdown,
                        const Matrix &xt, MlpCache *cache) {
    Matrix xn = rmsnorm_rows(xt, blk.norm_gain);
    Matrix u = matmul(xn, transpose(wup));
    Matrix a = activation_forward(blk.activation, u);
    Matrix out = add(xt, matmul(a, transpose(wdown)));
    if (cache != nullptr) {
        cache->xn = std::move(xn);
        cache->u = std::move(u);
        cache->a = std::move(a);
    }
    return out;
}

std::vector<Matrix> effective_weights(const BlockWeights &block, const BlockMask *mask) {
    const int n = block_layer_count(block);
    std::vector<Matrix> eff;
    eff.reserve(static_cast<std::size_t>(n));
    for (int l = 0; l < n; ++l) {
        if (mask != nullptr) {
            eff.push_back(hadamard(block_layer(block, l), (*mask)[static_cast<std::size_t>(l)]));
        } else {
            eff.push_back(block_layer(block, l));
        }
    }
    return eff;
}

int expected_d_model(const BlockWeights &block) {
    if (const auto *attn = std::get_if<AttentionBlockWeights>(&block)) {
        return attn->w_q.cols;
    }
    return std::get<MlpBlockWeights>(block).w_up.cols;
}

} // namespace

int block_layer_count(const BlockWeights &block) {
    return std::holds_alternative<AttentionBlockWeights>(block) ? 4 : 2;
}

const Matrix &block_layer(const BlockWeights &block, int idx) {
    if (const auto *attn = std::get_if<AttentionBlockWeights>(&block)) {
        switch (idx) {
            case 0: return attn->w_q;
            case 1: return attn->w_k;
            case 2: return attn->w_v;
            case 3: return attn->w_o;
            default: break;
        }
    } else {
        const auto &mlp = std::get<MlpBlockWeights>(block);
        switch (idx) {
            case 0: return mlp.w_up;
            case 1: return mlp.w_down;
            default: break;
        }
    }
    throw internal_error("block_layer: index out of range");
}

Matrix &block_layer_mut(BlockWeights &block, int idx) {
    return const_cast<Matrix &>(block_layer(std::as_const(block), idx));
}

std::string block_layer_name(const BlockWeights &block, int idx) {
    static const char *attn_names[] = {"w_q", "w_k", "w_v", "w_o"};
    static const char *mlp_names[] = {"w_up", "w_down"};
    if (std::holds_alternative<AttentionBlockWeights>(block)) {
        return attn_names[idx];
    }
    return mlp_names[idx];
}

std::string block_kind_name(const BlockWeights &block) {
    return std::holds_alternative<AttentionBlockWeights>(block) ? "attention" : "mlp";
}

void validate_block(const BlockWeights &block, int d_model) {
    if (const auto *attn = std::get_if<AttentionBlockWeights>(&block)) {
        for (const Matrix *m : {&attn->w_q, &attn->w_k, &attn->w_v, &attn->w_o}) {
            if (m->rows != d_model || m->cols != d_model) {
                throw shape_error("attention block: projection is not d_model x d_model");
            }
        }
        if (attn->n_heads < 1 || d_model % attn->n_heads != 0) {
            throw shape_error("attention block: n_heads must be >= 1 and divide d_model");
        }
        if (static_cast<int>(attn->norm_gain.size()) != d_model) {
            throw shape_error("attention block: norm gain length mismatch");
        }
    } else {
        const auto &mlp = std::get<MlpBlockWeights>(block);
        if (mlp.w_up.cols != d_model || mlp.w_down.rows != d_model || mlp.w_up.rows != mlp.w_down.cols) {
            throw shape_error("mlp block: w_up/w_down shapes inconsistent");
        }
        if (static_cast<int>(mlp.norm_gain.size()) != d_model) {
            throw shape_error("mlp block: norm gain length mismatch");
        }
    }
}

void validate_block_mask_shapes(const BlockWeights &block, const BlockMask &mask) {
    const int n = block_layer_count(block);
    if (static_cast<int>(mask.size()) != n) {
        throw shape_error("mask: layer count mismatch");
    }
    for (int l = 0; l < n; ++l) {
        if (!mask[static_cast<std::size_t>(l)].same_shape(block_layer(block, l))) {
            throw shape_error("mask: shape mismatch at layer " + block_layer_name(block, l));
        }
    }
}

void validate_model(const TinyModel &model) {
    if (model.vocab_size < 1 || model.d_model < 1 || model.d_ff < 1 || model.n_heads < 1) {
        throw shape_error("model: dimensions must be positive");
    }
    if (model.d_model % model.n_heads != 0) {
        throw shape_error("model: n_heads must divide d_model");
    }
    if (model.blocks.empty() || model.blocks.size() % 2 != 0) {
        throw shape_error("model: blocks must come in attention/mlp pairs");
    }
    for (std::size_t b = 0; b < model.blocks.size(); ++b) {
        const bool want_attn = (b % 2 == 0);
        if (want_attn != std::holds_alternative<AttentionBlockWeights>(model.blocks[b])) {
            throw shape_error("model: blocks must alternate attention, mlp");
        }
        validate_block(model.blocks[b], model.d_model);
    }
    if (model.embedding.rows != model.vocab_size || model.embedding.cols != model.d_model) {
        throw shape_error("model: embedding shape mismatch");
    }
    if (model.head.rows != model.vocab_size || model.head.cols != model.d_model) {
        throw shape_error("model: head shape mismatch");
    }
    if (static_cast<int>(model.final_gain.size()) != model.d_model) {
        throw shape_error("model: final gain length mismatch");
    }
}

Matrix block_forward(const BlockWeights &block, const BlockMask *mask, const Matrix &x) {
    const int d = expected_d_model(block);
    if (x.rows != d) {
        throw shape_error("block_forward: x must have d_model rows");
    }
    if (mask != nullptr) {
        validate_block_mask_shapes(block, *mask);
    }
    const std::vector<Matrix> eff = effective_weights(block, mask);
    const Matrix xt = transpose(x);
    Matrix out_rows;
    if (const auto *attn = std::get_if<AttentionBlockWeights>(&block)) {
        out_rows = attention_forward_rows(*attn, eff[0], eff[1], eff[2], eff[3], xt, nullptr);
    } else {
        out_rows = mlp_forward_rows(std::get<MlpBlockWeights>(block), eff[0], eff[1], xt, nullptr);
    }
    return transpose(out_rows);
}

BlockGradients block_backward(const BlockWeights &block, const BlockMask &mask,
                              const Matrix &x, const Matrix &target) {
    const int d = expected_d_model(block);
    if (x.rows != d) {
        throw shape_error("block_backward: x must have d_model rows");
    }
    if (target.rows != d || target.cols != x.cols) {
        throw shape_error("block_backward: target shape mismatch");
    }
    validate_block_mask_shapes(block, mask);
    const std::vector<Matrix> eff = effective_weights(block, &mask);
    const Matrix xt = transpose(x);
    const Matrix target_t = transpose(target);

    BlockGradients grads;
    if (const auto *attn = std::get_if<AttentionBlockWeights>(&block)) {
        AttnCache cache;
        const Matrix y = attention_forward_rows(*attn, eff[0], eff[1], eff[2], eff[3], xt, &cache);
        const Matrix dy = scale(sub(y, target_t), 2.0); // dE/dy for E = ||target - y||^2

        const int n_heads = attn->n_heads;
        const int d_head = d / n_heads;
        const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_head));

        Matrix d_wo = matmul(transpose(dy), cache.ctx);
        Matrix dctx = matmul(dy, eff[3]);

        Matrix dq(xt.rows, d), dk(xt.rows, d), dv(xt.rows, d);
        for (int h = 0; h < n_heads; ++h) {
            const int c0 = h * d_head;
            const Matrix kh = col_slice(cache.k, c0, d_head);
            const Matrix qh = col_slice(cache.q, c0, d_head);
            const Matrix vh = col_slice(cache.v, c0, d_head);
            const Matrix &p = cache.probs[static_cast<std::size_t>(h)];
            const Matrix dch = col_slice(dctx, c0, d_head);

            Matrix dp = matmul(dch, transpose(vh));
            set_cols(dv, c0, matmul(transpose(p), dch));

            // softmax backward, row-wise; masked positions have p == 0
            Matrix ds(p.rows, p.cols);
            for (int i = 0; i < p.rows; ++i) {
                double rowdot = 0.0;
                for (int j = 0; j < p.cols; ++j) {
                    rowdot += dp.at(i, j) * p.at(i, j);
                }
                for (int j = 0; j < p.cols; ++j) {
                    ds.at(i, j) = p.at(i, j) * (dp.at(i, j) - rowdot);
                }
            }
            set_cols(dq, c0, scale(matmul(ds, kh), inv_sqrt));
            set_cols(dk, c0, scale(matmul(transpose(ds), qh), inv_sqrt));
        }
        grads.layers.push_back(matmul(transpose(dq), cache.xn));
        grads.layers.push_back(matmul(transpose(dk), cache.xn));
        grads.layers.push_back(matmul(transpose(dv), cache.xn));
        grads.layers.push_back(std::move(d_wo));
    } else {
        const auto &mlp = std::get<MlpBlockWeights>(block);
        MlpCache cache;
        const Matrix y = mlp_forward_rows(mlp, eff[0], eff[1], xt, &cache);
        const Matrix dy = scale(sub(y, target_t), 2.0);

        Matrix d_wdown = matmul(transpose(dy), cache.a);
        Matrix da = matmul(dy, eff[1]);
        Matrix du = hadamard(da, activation_derivative(mlp.activation, cache.u));
        grads.layers.push_back(matmul(transpose(du), cache.xn));
        grads.layers.push_back(std::move(d_wdown));
    }
    return grads;
}

BlockGradients block_backward(const BlockWeights &block, const BlockMask &mask,
                              std::span<const Matrix> xs, std::span<const Matrix> targets) {
    if (xs.size() != targets.size() || xs.empty()) {
        throw input_error("block_backward: need matching non-empty x/target lists");
    }
    BlockGradients total = block_backward(block, mask, xs[0], targets[0]);
    for (std::size_t i = 1; i < xs.size(); ++i) {
        accumulate_gradients(total, block_backward(block, mask, xs[i], targets[i]));
    }
    return total;
}

void accumulate_gradients(BlockGradients &into, const BlockGradients &from) {
    if (into.layers.size() != from.layers.size()) {
        throw shape_error("accumulate_gradients: layer count mismatch");
    }
    for (std::size_t l = 0; l < into.layers.size(); ++l) {
        into.layers[l] = add(into.layers[l], from.layers[l]);
    }
}

Matrix embed_tokens(const TinyModel &model, const TokenSequence &tokens) {
    Matrix x(model.d_model, static_cast<int>(tokens.size()));
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        const int id = tokens[t];
        if (id < 0 || id >= model.vocab_size) {
            throw input_error("token id " + std::to_string(id) + " out of range at position " +
                              std::to_string(t));
        }
        for (int r = 0; r < model.d_model; ++r) {
            x.at(r, static_cast<int>(t)) = model.embedding.at(id, r);
        }
    }
    return x;
}

Matrix model_forward(const TinyModel &model, const TokenSequence &tokens, const ModelMasks *masks) {
    if (masks != nullptr && masks->blocks.size() != model.blocks.size()) {
        throw shape_error("model_forward: masks must cover every block");
    }
    Matrix x = embed_tokens(model, tokens);
    for (std::size_t b = 0; b < model.blocks.size(); ++b) {
        const BlockMask *mask = masks != nullptr ? &masks->blocks[b] : nullptr;
        x = block_forward(model.blocks[b], mask, x);
    }
    const Matrix xn = rmsnorm_rows(transpose(x), model.final_gain); // T x d
    return transpose(matmul(xn, transpose(model.head)));            // vocab x T
}

double perplexity(const TinyModel &model, const ModelMasks *masks,
                  const std::vector<TokenSequence> &corpus) {
    if (corpus.empty()) {
        throw input_error("perplexity: empty corpus");
    }
    double total_ce = 0.0;
    long positions = 0;
    for (const TokenSequence &seq : corpus) {
        if (seq.size() < 2) {
            throw input_error("perplexity: every sequence needs length >= 2");
        }
        const Matrix logits = model_forward(model, seq, masks); // vocab x T
        for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int v = 0; v < logits.rows; ++v) {
                mx = std::max(mx, logits.at(v, static_cast<int>(t)));
            }
            double sum = 0.0;
            for (int v = 0; v < logits.rows; ++v) {
                sum += std::exp(logits.at(v, static_cast<int>(t)) - mx);
            }
            const double lse = mx + std::log(sum);
            total_ce += lse - logits.at(seq[t + 1], static_cast<int>(t));
            ++positions;
        }
    }
    return std::exp(total_ce / static_cast<double>(positions));
}

std::vector<std::vector<Matrix>> collect_layer_inputs(const TinyModel &model, const ModelMasks *masks,
                                                      const std::vector<TokenSequence> &corpus) {
    if (corpus.empty()) {
        throw input_error("collect_layer_inputs: empty corpus");
    }
    if (masks != nullptr && masks->blocks.size() != model.blocks.size()) {
        throw shape_error("collect_layer_inputs: masks must cover every block");
    }

    // per block, per layer, one (C_in x T_s) slab per sequence
    std::vector<std::vector<std::vector<Matrix>>> slabs(model.blocks.size());
    for (std::size_t b = 0; b < model.blocks.size(); ++b) {
        slabs[b].resize(static_cast<std::size_t>(block_layer_count(model.blocks[b])));
    }

    for (const TokenSequence &seq : corpus) {
        Matrix x = embed_tokens(model, seq);
        for (std::size_t b = 0; b < model.blocks.size(); ++b) {
            const BlockWeights &block = model.blocks[b];
            const BlockMask *mask = masks != nullptr ? &masks->blocks[b] : nullptr;
            const std::vector<Matrix> eff = effective_weights(block, mask);
            const Matrix xt = transpose(x);
            Matrix out_rows;
            if (const auto *attn = std::get_if<AttentionBlockWeights>(&block)) {
                AttnCache cache;
                out_rows = attention_forward_rows(*attn, eff[0], eff[1], eff[2], eff[3], xt, &cache);
                const Matrix xn_cols = transpose(cache.xn);
                slabs[b][0].push_back(xn_cols);
                slabs[b][1].push_back(xn_cols);
                slabs[b][2].push_back(xn_cols);
                slabs[b][3].push_back(transpose(cache.ctx));
            } else {
                MlpCache cache;
                out_rows = mlp_forward_rows(std::get<MlpBlockWeights>(block), eff[0], eff[1], xt, &cache);
                slabs[b][0].push_back(transpose(cache.xn));
                slabs[b][1].push_back(transpose(cache.a));
            }
            x = transpose(out_rows);
        }
    }

    std::vector<std::vector<Matrix>> result(model.blocks.size());
    for (std::size_t b = 0; b < model.blocks.size(); ++b) {
        for (std::size_t l = 0; l < slabs[b].size(); ++l) {
            int total_cols = 0;
            for (const Matrix &m : slabs[b][l]) {
                total_cols += m.cols;
            }
            Matrix pooled(slabs[b][l][0].rows, total_cols);
            int c0 = 0;
            for (const Matrix &m : slabs[b][l]) {
                set_cols(pooled, c0, m);
                c0 += m.cols;
            }
            result[b].push_back(std::move(pooled));
        }
    }
    return result;
}

TinyModel make_random_model(std::uint64_t seed, int vocab_size, int d_model, int d_ff,
                            int n_heads, int n_block_pairs, Activation activation) {
    if (vocab_size < 1 || d_model < 1 || d_ff < 1 || n_heads < 1 || n_block_pairs < 1) {
        throw input_error("make_random_model: dimensions must be positive");
    }
    if (d_model % n_heads != 0) {
        throw input_error("make_random_model: n_heads must divide d_model");
    }
    Rng rng(seed);
    const auto fill = [&rng](Matrix &m, double sigma) {
        for (double &v : m.data) {
            v = sigma * rng.next_gaussian();
        }
    };
    const double sig_d = 1.0 / std::sqrt(static_cast<double>(d_model));
    const double sig_ff = 1.0 / std::sqrt(static_cast<double>(d_ff));

    TinyModel model;
    model.vocab_size = vocab_size;
    model.d_model = d_model;
    model.d_ff = d_ff;
    model.n_heads = n_heads;
    model.activation = activation;
    model.embedding = Matrix(vocab_size, d_model);
    fill(model.embedding, 1.0);
    for (int p = 0; p < n_block_pairs; ++p) {
        AttentionBlockWeights attn;
        attn.n_heads = n_heads;
        attn.norm_gain.assign(static_cast<std::size_t>(d_model), 1.0);
        attn.w_q = Matrix(d_model, d_model);
        attn.w_k = Matrix(d_model, d_model);
        attn.w_v = Matrix(d_model, d_model);
        attn.w_o = Matrix(d_model, d_model);
        fill(attn.w_q, sig_d);
        fill(attn.w_k, sig_d);
        fill(attn.w_v, sig_d);
        fill(attn.w_o, sig_d);
        model.blocks.emplace_back(std::move(attn));

        MlpBlockWeights mlp;
        mlp.activation = activation;
        mlp.norm_gain.assign(static_cast<std::size_t>(d_model), 1.0);
        mlp.w_up = Matrix(d_ff, d_model);
        mlp.w_down = Matrix(d_model, d_ff);
        fill(mlp.w_up, sig_d);
        fill(mlp.w_down, sig_ff);
        model.blocks.emplace_back(std::move(mlp));
    }
    model.final_gain.assign(static_cast<std::size_t>(d_model), 1.0);
    model.head = Matrix(vocab_size, d_model);
    fill(model.head, sig_d);
    validate_model(model);
    return model;
}

} // namespace barber
