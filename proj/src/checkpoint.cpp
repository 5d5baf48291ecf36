#include "barber/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace barber {

namespace {

constexpr char kModelMagic[5] = {'T', 'B', 'K', 'T', '1'};
constexpr char kMaskMagic[5] = {'T', 'B', 'M', 'K', '1'};
constexpr std::uint8_t kVersion = 1;

void put_u32(std::vector<std::uint8_t> &out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

void put_f64(std::vector<std::uint8_t> &out, double v) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
    }
}

struct ByteReader {
    const std::vector<std::uint8_t> &bytes;
    std::size_t pos = 0;

    void require(std::size_t n, const char *what) const {
        if (pos + n > bytes.size()) {
            throw format_error(std::string("truncated file: needed ") + std::to_string(n) +
                               " bytes for " + what + " at byte offset " + std::to_string(pos));
        }
    }

    std::uint8_t take_u8(const char *what) {
        require(1, what);
        return bytes[pos++];
    }

    std::uint32_t take_u32(const char *what) {
        require(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(bytes[pos + static_cast<std::size_t>(i)]) << (8 * i);
        }
        pos += 4;
        return v;
    }

    double take_f64(const char *what) {
        require(8, what);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) {
            bits |= static_cast<std::uint64_t>(bytes[pos + static_cast<std::size_t>(i)]) << (8 * i);
        }
        pos += 8;
        return std::bit_cast<double>(bits);
    }

    void expect_magic(const char magic[5], const char *kind) {
        require(6, "magic and version");
        if (std::memcmp(bytes.data(), magic, 5) != 0) {
            throw format_error(std::string("bad ") + kind + " magic at byte offset 0");
        }
        pos = 5;
        const std::uint8_t version = bytes[pos++];
        if (version != kVersion) {
            throw format_error(std::string("unsupported ") + kind + " version " +
                               std::to_string(version) + " at byte offset 5");
        }
    }
};

struct Header {
    std::uint32_t vocab_size, d_model, d_ff, n_heads, n_block_pairs, activation;
};

Header read_header(ByteReader &r) {
    Header h;
    h.vocab_size = r.take_u32("vocab_size");
    h.d_model = r.take_u32("d_model");
    h.d_ff = r.take_u32("d_ff");
    h.n_heads = r.take_u32("n_heads");
    h.n_block_pairs = r.take_u32("n_block_pairs");
    h.activation = r.take_u32("activation");
    if (h.vocab_size == 0 || h.d_model == 0 || h.d_ff == 0 || h.n_heads == 0 ||
        h.n_block_pairs == 0) {
        throw format_error("header field is zero (byte offsets 6..25)");
    }
    if (h.d_model % h.n_heads != 0) {
        throw format_error("header: n_heads does not divide d_model (byte offsets 6..25)");
    }
    if (h.activation > 1) {
        throw format_error("header: unknown activation id " + std::to_string(h.activation) +
                           " at byte offset 26");
    }
    // keep desk-scale files from requesting absurd allocations
    const std::uint64_t entries = static_cast<std::uint64_t>(h.vocab_size) * h.d_model;
    if (h.vocab_size > (1u << 20) || h.d_model > (1u << 16) || h.d_ff > (1u << 16) ||
        h.n_block_pairs > (1u << 12) || entries > (1ull << 28)) {
        throw format_error("header: dimensions exceed supported range");
    }
    return h;
}

void put_header(std::vector<std::uint8_t> &out, const TinyModel &model) {
    put_u32(out, static_cast<std::uint32_t>(model.vocab_size));
    put_u32(out, static_cast<std::uint32_t>(model.d_model));
    put_u32(out, static_cast<std::uint32_t>(model.d_ff));
    put_u32(out, static_cast<std::uint32_t>(model.n_heads));
    put_u32(out, static_cast<std::uint32_t>(model.n_block_pairs()));
    put_u32(out, static_cast<std::uint32_t>(model.activation));
}

void put_matrix(std::vector<std::uint8_t> &out, const Matrix &m) {
    for (double v : m.data) {
        put_f64(out, v);
    }
}

Matrix take_matrix(ByteReader &r, int rows, int cols, const char *what) {
    Matrix m(rows, cols);
    for (double &v : m.data) {
        v = r.take_f64(what);
    }
    return m;
}

std::vector<double> take_vector(ByteReader &r, int n, const char *what) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (double &x : v) {
        x = r.take_f64(what);
    }
    return v;
}

} // namespace

std::vector<std::uint8_t> save_checkpoint(const TinyModel &model) {
    validate_model(model);
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kModelMagic, kModelMagic + 5);
    out.push_back(kVersion);
    put_header(out, model);
    put_matrix(out, model.embedding);
    for (int p = 0; p < model.n_block_pairs(); ++p) {
        const auto &attn = std::get<AttentionBlockWeights>(model.blocks[static_cast<std::size_t>(2 * p)]);
        const auto &mlp = std::get<MlpBlockWeights>(model.blocks[static_cast<std::size_t>(2 * p + 1)]);
        for (double g : attn.norm_gain) {
            put_f64(out, g);
        }
        put_matrix(out, attn.w_q);
        put_matrix(out, attn.w_k);
        put_matrix(out, attn.w_v);
        put_matrix(out, attn.w_o);
        for (double g : mlp.norm_gain) {
            put_f64(out, g);
        }
        put_matrix(out, mlp.w_up);
        put_matrix(out, mlp.w_down);
    }
    for (double g : model.final_gain) {
        put_f64(out, g);
    }
    put_matrix(out, model.head);
    return out;
}

TinyModel load_checkpoint(const std::vector<std::uint8_t> &bytes) {
    ByteReader r{bytes};
    r.expect_magic(kModelMagic, "checkpoint");
    const Header h = read_header(r);

    TinyModel model;
    model.vocab_size = static_cast<int>(h.vocab_size);
    model.d_model = static_cast<int>(h.d_model);
    model.d_ff = static_cast<int>(h.d_ff);
    model.n_heads = static_cast<int>(h.n_heads);
    model.activation = static_cast<Activation>(h.activation);
    model.embedding = take_matrix(r, model.vocab_size, model.d_model, "embedding");
    for (std::uint32_t p = 0; p < h.n_block_pairs; ++p) {
        AttentionBlockWeights attn;
        attn.n_heads = model.n_heads;
        attn.norm_gain = take_vector(r, model.d_model, "attention norm gain");
        attn.w_q = take_matrix(r, model.d_model, model.d_model, "w_q");
        attn.w_k = take_matrix(r, model.d_model, model.d_model, "w_k");
        attn.w_v = take_matrix(r, model.d_model, model.d_model, "w_v");
        attn.w_o = take_matrix(r, model.d_model, model.d_model, "w_o");
        model.blocks.emplace_back(std::move(attn));

        MlpBlockWeights mlp;
        mlp.activation = model.activation;
        mlp.norm_gain = take_vector(r, model.d_model, "mlp norm gain");
        mlp.w_up = take_matrix(r, model.d_ff, model.d_model, "w_up");
        mlp.w_down = take_matrix(r, model.d_model, model.d_ff, "w_down");
        model.blocks.emplace_back(std::move(mlp));
    }
    model.final_gain = take_vector(r, model.d_model, "final norm gain");
    model.head = take_matrix(r, model.vocab_size, model.d_model, "head");
    if (r.pos != bytes.size()) {
        throw format_error("trailing bytes after payload at byte offset " + std::to_string(r.pos));
    }
    validate_model(model);
    return model;
}

std::vector<std::uint8_t> save_mask(const TinyModel &model, const ModelMasks &masks) {
    validate_mask(model, masks);
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMaskMagic, kMaskMagic + 5);
    out.push_back(kVersion);
    put_header(out, model);
    for (const BlockMask &bm : masks.blocks) {
        for (const Matrix &m : bm) {
            for (double v : m.data) {
                out.push_back(v == 0.0 ? 0 : 1);
            }
        }
    }
    return out;
}

ModelMasks load_mask(const std::vector<std::uint8_t> &bytes, const TinyModel &model) {
    ByteReader r{bytes};
    r.expect_magic(kMaskMagic, "mask");
    const Header h = read_header(r);
    if (static_cast<int>(h.vocab_size) != model.vocab_size ||
        static_cast<int>(h.d_model) != model.d_model ||
        static_cast<int>(h.d_ff) != model.d_ff ||
        static_cast<int>(h.n_heads) != model.n_heads ||
        static_cast<int>(h.n_block_pairs) != model.n_block_pairs() ||
        static_cast<int>(h.activation) != static_cast<int>(model.activation)) {
        throw shape_error("mask header does not match the model");
    }

    ModelMasks masks;
    for (const BlockWeights &block : model.blocks) {
        BlockMask bm;
        const int n = block_layer_count(block);
        for (int l = 0; l < n; ++l) {
            const Matrix &w = block_layer(block, l);
            Matrix m(w.rows, w.cols);
            for (double &v : m.data) {
                const std::uint8_t byte = r.take_u8("mask entry");
                if (byte > 1) {
                    throw format_error("mask entry is not 0/1 at byte offset " +
                                       std::to_string(r.pos - 1));
                }
                v = static_cast<double>(byte);
            }
            bm.push_back(std::move(m));
        }
        masks.blocks.push_back(std::move(bm));
    }
    if (r.pos != bytes.size()) {
        throw format_error("trailing bytes after payload at byte offset " + std::to_string(r.pos));
    }
    return masks;
}

void write_file(const std::string &path, const std::vector<std::uint8_t> &bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw input_error("cannot open " + path + " for writing");
    }
    out.write(reinterpret_cast<const char *>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw input_error("failed writing " + path);
    }
}

std::vector<std::uint8_t> read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) {
        throw input_error("cannot open " + path);
    }
    const std::streamsize size = in.tellg();
    in.seekg(0);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
    if (size > 0) {
        in.read(reinterpret_cast<char *>(bytes.data()), size);
    }
    if (!in) {
        throw input_error("failed reading " + path);
    }
    return bytes;
}

} // namespace barber
