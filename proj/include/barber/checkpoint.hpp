#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "barber/mask.hpp"
#include "barber/model.hpp"

namespace barber {

// Binary formats, both little-endian with no padding.
//
// TBKT1 checkpoint: magic "TBKT1", version byte 0x01, six u32 header fields
// (vocab_size, d_model, d_ff, n_heads, n_block_pairs, activation id), then
// all tensors as f64 row-major in declared order: embedding; per block pair
// [attention norm gain, w_q, w_k, w_v, w_o, mlp norm gain, w_up, w_down];
// final norm gain; head.
//
// TBMK1 mask: magic "TBMK1", version byte 0x01, the same six u32 fields,
// then one byte (0 or 1) per weight entry, row-major, for the linear layers
// in declared order: per block pair [w_q, w_k, w_v, w_o, w_up, w_down].

std::vector<std::uint8_t> save_checkpoint(const TinyModel &model);
TinyModel load_checkpoint(const std::vector<std::uint8_t> &bytes);

std::vector<std::uint8_t> save_mask(const TinyModel &model, const ModelMasks &masks);
ModelMasks load_mask(const std::vector<std::uint8_t> &bytes, const TinyModel &model);

void write_file(const std::string &path, const std::vector<std::uint8_t> &bytes);
std::vector<std::uint8_t> read_file(const std::string &path);

} // namespace barber
