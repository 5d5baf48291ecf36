#pragma once

#include <utility>

#include "barber/model.hpp"

namespace barber {

// Validity of a binary mask matrix: every entry exactly 0.0 or 1.0.
bool is_binary(const Matrix &m);

// (zeros, total) for exact sparsity bookkeeping
std::pair<long, long> zero_count(const Matrix &m);

long ones_count(const Matrix &m);

Matrix ones_like(const Matrix &m);

// all-ones masks for every linear layer of every block
ModelMasks dense_masks(const TinyModel &model);

void validate_mask(const TinyModel &model, const ModelMasks &masks);

// N:M pattern along the input axis: every group of m consecutive entries in a
// row keeps exactly n.
struct NmPattern {
    int n = 0;
    int m = 0;
};

void validate_nm_pattern(const NmPattern &p);

// true iff every m-group of every row holds exactly n ones
bool satisfies_nm(const Matrix &mask, const NmPattern &p);

void require_nm(const Matrix &mask, const NmPattern &p);
void require_nm(const ModelMasks &masks, const NmPattern &p);

} // namespace barber
