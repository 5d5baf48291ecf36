#include "barber/mask.hpp"

#include <string>

namespace barber {

bool is_binary(const Matrix &m) {
    for (double v : m.data) {
        if (v != 0.0 && v != 1.0) {
            return false;
        }
    }
    return true;
}

std::pair<long, long> zero_count(const Matrix &m) {
    long zeros = 0;
    for (double v : m.data) {
        if (v == 0.0) {
            ++zeros;
        }
    }
    return {zeros, static_cast<long>(m.size())};
}

long ones_count(const Matrix &m) {
    const auto [zeros, total] = zero_count(m);
    return total - zeros;
}

Matrix ones_like(const Matrix &m) {
    Matrix out(m.rows, m.cols);
    for (double &v : out.data) {
        v = 1.0;
    }
    return out;
}

ModelMasks dense_masks(const TinyModel &model) {
    ModelMasks masks;
    masks.blocks.reserve(model.blocks.size());
    for (const BlockWeights &block : model.blocks) {
        BlockMask bm;
        const int n = block_layer_count(block);
        for (int l = 0; l < n; ++l) {
            bm.push_back(ones_like(block_layer(block, l)));
        }
        masks.blocks.push_back(std::move(bm));
    }
    return masks;
}

void validate_mask(const TinyModel &model, const ModelMasks &masks) {
    if (masks.blocks.size() != model.blocks.size()) {
        throw shape_error("mask: must cover every block (" + std::to_string(masks.blocks.size()) +
                          " vs " + std::to_string(model.blocks.size()) + ")");
    }
    for (std::size_t b = 0; b < model.blocks.size(); ++b) {
        validate_block_mask_shapes(model.blocks[b], masks.blocks[b]);
        for (const Matrix &m : masks.blocks[b]) {
            if (!is_binary(m)) {
                throw format_error("mask: non-binary entry in block " + std::to_string(b));
            }
        }
    }
}

void validate_nm_pattern(const NmPattern &p) {
    if (p.n < 1 || p.m <= p.n) {
        throw input_error("N:M pattern requires 1 <= N < M, got " + std::to_string(p.n) + ":" +
                          std::to_string(p.m));
    }
}

bool satisfies_nm(const Matrix &mask, const NmPattern &p) {
    if (mask.cols % p.m != 0) {
        return false;
    }
    for (int r = 0; r < mask.rows; ++r) {
        for (int g = 0; g < mask.cols / p.m; ++g) {
            int ones = 0;
            for (int j = 0; j < p.m; ++j) {
                if (mask.at(r, g * p.m + j) != 0.0) {
                    ++ones;
                }
            }
            if (ones != p.n) {
                return false;
            }
        }
    }
    return true;
}

void require_nm(const Matrix &mask, const NmPattern &p) {
    validate_nm_pattern(p);
    if (mask.cols % p.m != 0) {
        throw input_error("N:M: input dimension " + std::to_string(mask.cols) +
                          " not divisible by " + std::to_string(p.m));
    }
    if (!satisfies_nm(mask, p)) {
        throw input_error("N:M: mask does not hold exactly " + std::to_string(p.n) + " ones per " +
                          std::to_string(p.m) + "-group");
    }
}

void require_nm(const ModelMasks &masks, const NmPattern &p) {
    for (const BlockMask &bm : masks.blocks) {
        for (const Matrix &m : bm) {
            require_nm(m, p);
        }
    }
}

} // namespace barber
