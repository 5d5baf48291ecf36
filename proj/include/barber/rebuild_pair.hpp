#pragma once

#include <tuple>

namespace barber {

// Flat address of one weight entry inside a block: layer index within the
// block (attention: 0..3 for w_q/w_k/w_v/w_o; mlp: 0..1 for w_up/w_down),
// then (row, col) inside that matrix.
struct WeightIndex {
    int layer = 0;
    int row = 0;
    int col = 0;

    friend bool operator==(const WeightIndex &a, const WeightIndex &b) {
        return a.layer == b.layer && a.row == b.row && a.col == b.col;
    }
    friend bool operator<(const WeightIndex &a, const WeightIndex &b) {
        return std::tie(a.layer, a.row, a.col) < std::tie(b.layer, b.row, b.col);
    }
};

// A proposed mask swap: grow currently has mask 0, prune currently has mask
// 1, value = S_grow - S_prune.
struct RebuildPair {
    WeightIndex grow;
    WeightIndex prune;
    double grow_score = 0.0;
    double prune_score = 0.0;
    double value = 0.0;
    int group_id = 0;
};

} // namespace barber
