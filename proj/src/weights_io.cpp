// SPDX-License-Identifier: Apache-2.0
#include "tllm/weights_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace tllm {

namespace {

constexpr char kMagic[4] = {'T', 'L', 'L', 'M'};
constexpr uint16_t kVersion = 1;
constexpr size_t kHeaderBytes = 48;
constexpr size_t kSectionDescBytes = 36;
constexpr size_t kIndexSlackBytes = 8;

class ByteWriter {
public:
    std::vector<uint8_t> buf;

    void u8(uint8_t v) { buf.push_back(v); }
    void u16(uint16_t v) {
        buf.push_back(static_cast<uint8_t>(v));
        buf.push_back(static_cast<uint8_t>(v >> 8));
    }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<uint32_t>(v)); }
    void bytes(const uint8_t* p, size_t n) { buf.insert(buf.end(), p, p + n); }
};

class ByteReader {
public:
    ByteReader(std::span<const uint8_t> bytes, size_t pos = 0) : bytes_(bytes), pos_(pos) {}

    size_t pos() const { return pos_; }

    void need(size_t n, const char* what) const {
        if (pos_ + n > bytes_.size()) {
            std::ostringstream msg;
            msg << "weight file truncated reading " << what << " at offset " << pos_ << " (need " << n
                << " bytes, " << bytes_.size() - pos_ << " left)";
            throw FormatError(msg.str());
        }
    }
    uint8_t u8(const char* what) {
        need(1, what);
        return bytes_[pos_++];
    }
    uint16_t u16(const char* what) {
        need(2, what);
        uint16_t v = static_cast<uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    uint64_t u64(const char* what) {
        need(8, what);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

private:
    std::span<const uint8_t> bytes_;
    size_t pos_;
};

float f32_at(std::span<const uint8_t> bytes, size_t pos) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes[pos + i]) << (8 * i);
    return std::bit_cast<float>(v);
}

struct SectionPayload {
    SectionDesc desc;
    std::vector<uint8_t> payload;
};

std::vector<uint8_t> float_span_bytes(std::span<const float> v) {
    ByteWriter w;
    w.buf.reserve(v.size() * 4);
    for (float x : v) w.f32(x);
    return std::move(w.buf);
}

SectionPayload packed_section(SectionKind kind, uint16_t layer, const ScaledTernary& st,
                              const TlmmParams& params) {
    const PackedWeights pw = encode_weights(st.w, params, st.scale == 0.0f ? 1.0f : st.scale);
    SectionPayload s;
    s.desc.kind = kind;
    s.desc.layer = layer;
    s.desc.rows = static_cast<uint32_t>(pw.logical_rows);
    s.desc.cols = static_cast<uint32_t>(pw.logical_cols);
    s.desc.padded_rows = static_cast<uint32_t>(pw.padded_rows);
    s.desc.scale = pw.weight_scale;
    s.payload.assign(pw.indices.begin(), pw.indices.begin() + pw.payload_bytes());
    return s;
}

SectionPayload raw_section(SectionKind kind, uint16_t layer, uint32_t rows, uint32_t cols,
                           std::vector<uint8_t> payload) {
    SectionPayload s;
    s.desc.kind = kind;
    s.desc.layer = layer;
    s.desc.rows = rows;
    s.desc.cols = cols;
    s.payload = std::move(payload);
    return s;
}

void expect_shape(const FloatMatrix& m, int rows, int cols, const char* what) {
    if (m.rows != rows || m.cols != cols) {
        throw ShapeError(std::string("pack_model: ") + what + " has wrong shape");
    }
}

void expect_shape(const TernaryMatrix& m, int rows, int cols, const char* what) {
    if (m.rows != rows || m.cols != cols) {
        throw ShapeError(std::string("pack_model: ") + what + " has wrong shape");
    }
}

}  // namespace

bool is_packed_kind(SectionKind kind) {
    switch (kind) {
        case SectionKind::wq:
        case SectionKind::wk:
        case SectionKind::wv:
        case SectionKind::wo:
        case SectionKind::w_gate:
        case SectionKind::w_up:
        case SectionKind::w_down:
            return true;
        default:
            return false;
    }
}

const char* section_kind_name(SectionKind kind) {
    switch (kind) {
        case SectionKind::embedding: return "embedding";
        case SectionKind::rms1: return "rms1";
        case SectionKind::rms2: return "rms2";
        case SectionKind::final_norm: return "final_norm";
        case SectionKind::lm_head_w: return "lm_head_w";
        case SectionKind::lm_head_scale: return "lm_head_scale";
        case SectionKind::wq: return "wq";
        case SectionKind::wk: return "wk";
        case SectionKind::wv: return "wv";
        case SectionKind::wo: return "wo";
        case SectionKind::w_gate: return "w_gate";
        case SectionKind::w_up: return "w_up";
        case SectionKind::w_down: return "w_down";
    }
    return "?";
}

ScaledTernary ternarize(const FloatMatrix& w) {
    if (w.rows < 1 || w.cols < 1) {
        throw ShapeError("ternarize: empty matrix");
    }
    double abs_sum = 0.0;
    for (float x : w.v) {
        if (!std::isfinite(x)) throw NumericError("ternarize: non-finite input");
        abs_sum += std::fabs(x);
    }
    ScaledTernary out;
    out.scale = abs_sum > 0.0 ? static_cast<float>(abs_sum / w.v.size()) : 1.0f;
    out.w = TernaryMatrix(w.rows, w.cols);
    for (size_t i = 0; i < w.v.size(); ++i) {
        const float r = std::round(w.v[i] / out.scale);
        out.w.t[i] = static_cast<int8_t>(std::min(1.0f, std::max(-1.0f, r)));
    }
    return out;
}

UnpackedModel make_toy_model(const ModelConfig& config, uint64_t seed) {
    config.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> gauss(0.0f, 1.0f);
    std::uniform_real_distribution<float> gamma_dist(0.9f, 1.1f);

    auto random_ternary = [&](int rows, int cols) {
        FloatMatrix f(rows, cols);
        for (float& x : f.v) x = gauss(rng);
        return ternarize(f);
    };
    auto random_gamma = [&](int n) {
        RmsNormWeights g;
        g.gamma.resize(n);
        for (float& x : g.gamma) x = gamma_dist(rng);
        return g;
    };

    UnpackedModel m;
    m.config = config;
    m.embedding = FloatMatrix(config.vocab, config.d_model);
    for (float& x : m.embedding.v) x = 0.5f * gauss(rng);

    m.layers.resize(config.n_layers);
    for (UnpackedLayer& l : m.layers) {
        l.wq = random_ternary(config.d_model, config.d_model);
        l.wk = random_ternary(config.d_model, config.d_model);
        l.wv = random_ternary(config.d_model, config.d_model);
        l.wo = random_ternary(config.d_model, config.d_model);
        l.w_gate = random_ternary(config.d_model, config.d_ffn);
        l.w_up = random_ternary(config.d_model, config.d_ffn);
        l.w_down = random_ternary(config.d_ffn, config.d_model);
        l.rms1 = random_gamma(config.d_model);
        l.rms2 = random_gamma(config.d_model);
    }
    m.final_norm = random_gamma(config.d_model);
    m.lm_head = FloatMatrix(config.d_model, config.vocab);
    for (float& x : m.lm_head.v) x = gauss(rng);
    return m;
}

std::vector<uint8_t> pack_model(const UnpackedModel& model, const TlmmParams& params) {
    const ModelConfig& cfg = model.config;
    cfg.validate();
    params.validate();
    if (static_cast<int>(model.layers.size()) != cfg.n_layers) {
        throw ShapeError("pack_model: layer count != n_layers");
    }
    expect_shape(model.embedding, cfg.vocab, cfg.d_model, "embedding");
    expect_shape(model.lm_head, cfg.d_model, cfg.vocab, "lm_head");
    if (static_cast<int>(model.final_norm.gamma.size()) != cfg.d_model) {
        throw ShapeError("pack_model: final norm gamma length != d_model");
    }

    std::vector<SectionPayload> sections;
    sections.push_back(raw_section(SectionKind::embedding, 0xffff, cfg.vocab, cfg.d_model,
                                   float_span_bytes(model.embedding.v)));

    for (uint16_t li = 0; li < model.layers.size(); ++li) {
        const UnpackedLayer& l = model.layers[li];
        expect_shape(l.wq.w, cfg.d_model, cfg.d_model, "wq");
        expect_shape(l.wk.w, cfg.d_model, cfg.d_model, "wk");
        expect_shape(l.wv.w, cfg.d_model, cfg.d_model, "wv");
        expect_shape(l.wo.w, cfg.d_model, cfg.d_model, "wo");
        expect_shape(l.w_gate.w, cfg.d_model, cfg.d_ffn, "w_gate");
        expect_shape(l.w_up.w, cfg.d_model, cfg.d_ffn, "w_up");
        expect_shape(l.w_down.w, cfg.d_ffn, cfg.d_model, "w_down");
        if (static_cast<int>(l.rms1.gamma.size()) != cfg.d_model ||
            static_cast<int>(l.rms2.gamma.size()) != cfg.d_model) {
            throw ShapeError("pack_model: rms gamma length != d_model");
        }

        // q/k columns are exchanged here, once, so the engine can run the
        // consecutive-pair RoPE form.
        ScaledTernary wq_perm{permute_qk_head_columns(l.wq.w, cfg.n_heads, cfg.d_head()), l.wq.scale};
        ScaledTernary wk_perm{permute_qk_head_columns(l.wk.w, cfg.n_heads, cfg.d_head()), l.wk.scale};

        sections.push_back(packed_section(SectionKind::wq, li, wq_perm, params));
        sections.push_back(packed_section(SectionKind::wk, li, wk_perm, params));
        sections.push_back(packed_section(SectionKind::wv, li, l.wv, params));
        sections.push_back(packed_section(SectionKind::wo, li, l.wo, params));
        sections.push_back(packed_section(SectionKind::w_gate, li, l.w_gate, params));
        sections.push_back(packed_section(SectionKind::w_up, li, l.w_up, params));
        sections.push_back(packed_section(SectionKind::w_down, li, l.w_down, params));
        sections.push_back(raw_section(SectionKind::rms1, li, cfg.d_model, 1,
                                       float_span_bytes(l.rms1.gamma)));
        sections.push_back(raw_section(SectionKind::rms2, li, cfg.d_model, 1,
                                       float_span_bytes(l.rms2.gamma)));
    }

    sections.push_back(raw_section(SectionKind::final_norm, 0xffff, cfg.d_model, 1,
                                   float_span_bytes(model.final_norm.gamma)));

    // lm head: symmetric int8 per vocab column, stored column-contiguous
    {
        std::vector<uint8_t> wq8(static_cast<size_t>(cfg.vocab) * cfg.d_model);
        std::vector<float> scales(cfg.vocab);
        std::vector<float> col(cfg.d_model);
        for (int v = 0; v < cfg.vocab; ++v) {
            for (int r = 0; r < cfg.d_model; ++r) col[r] = model.lm_head.at(r, v);
            const QuantizedRow q = quantize_absmax(col, absmax_of(col));
            scales[v] = q.scale;
            std::memcpy(wq8.data() + static_cast<size_t>(v) * cfg.d_model, q.values.data(),
                        q.values.size());
        }
        sections.push_back(
            raw_section(SectionKind::lm_head_w, 0xffff, cfg.vocab, cfg.d_model, std::move(wq8)));
        sections.push_back(raw_section(SectionKind::lm_head_scale, 0xffff, cfg.vocab, 1,
                                       float_span_bytes(scales)));
    }

    // assign offsets after the header and section table
    uint64_t offset = kHeaderBytes + kSectionDescBytes * sections.size();
    for (SectionPayload& s : sections) {
        s.desc.offset = offset;
        s.desc.size = s.payload.size();
        offset += s.desc.size;
    }

    ByteWriter w;
    w.buf.reserve(offset);
    w.bytes(reinterpret_cast<const uint8_t*>(kMagic), 4);
    w.u16(kVersion);
    w.u16(0);
    w.u32(static_cast<uint32_t>(cfg.d_model));
    w.u32(static_cast<uint32_t>(cfg.d_ffn));
    w.u32(static_cast<uint32_t>(cfg.n_layers));
    w.u32(static_cast<uint32_t>(cfg.n_heads));
    w.u32(static_cast<uint32_t>(cfg.max_seq));
    w.u32(static_cast<uint32_t>(cfg.vocab));
    w.f32(cfg.rms_eps);
    w.u16(static_cast<uint16_t>(params.g));
    w.u16(static_cast<uint16_t>(params.t));
    w.u16(static_cast<uint16_t>(params.q));
    w.u16(static_cast<uint16_t>(params.b_idx()));
    w.u32(static_cast<uint32_t>(sections.size()));
    for (const SectionPayload& s : sections) {
        w.u16(static_cast<uint16_t>(s.desc.kind));
        w.u16(s.desc.layer);
        w.u32(s.desc.rows);
        w.u32(s.desc.cols);
        w.u32(s.desc.padded_rows);
        w.f32(s.desc.scale);
        w.u64(s.desc.offset);
        w.u64(s.desc.size);
    }
    for (const SectionPayload& s : sections) {
        w.bytes(s.payload.data(), s.payload.size());
    }
    return std::move(w.buf);
}

FileInfo inspect_file(std::span<const uint8_t> bytes) {
    ByteReader r(bytes);
    r.need(4, "magic");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError("bad magic (expected \"TLLM\")");
    }
    ByteReader h(bytes, 4);
    const uint16_t version = h.u16("version");
    if (version != kVersion) {
        std::ostringstream msg;
        msg << "unsupported weight file version " << version;
        throw FormatError(msg.str());
    }
    h.u16("reserved");

    FileInfo info;
    info.total_bytes = bytes.size();
    info.config.d_model = static_cast<int>(h.u32("d_model"));
    info.config.d_ffn = static_cast<int>(h.u32("d_ffn"));
    info.config.n_layers = static_cast<int>(h.u32("n_layers"));
    info.config.n_heads = static_cast<int>(h.u32("n_heads"));
    info.config.max_seq = static_cast<int>(h.u32("max_seq"));
    info.config.vocab = static_cast<int>(h.u32("vocab"));
    info.config.rms_eps = h.f32("rms_eps");
    info.params.g = h.u16("g");
    info.params.t = h.u16("t");
    info.params.q = h.u16("q");
    info.b_idx = h.u16("b_idx");
    const uint32_t n_sections = h.u32("n_sections");

    try {
        info.config.validate();
        info.params.validate();
    } catch (const std::exception& e) {
        throw FormatError(std::string("invalid header: ") + e.what());
    }
    if (info.b_idx != info.params.b_idx()) {
        std::ostringstream msg;
        msg << "header b_idx " << info.b_idx << " != ceil(log2 3^g) = " << info.params.b_idx();
        throw FormatError(msg.str());
    }
    const uint32_t expected = 9u * info.config.n_layers + 4u;
    if (n_sections != expected) {
        std::ostringstream msg;
        msg << "section count " << n_sections << " != expected " << expected;
        throw FormatError(msg.str());
    }

    uint64_t prev_end = kHeaderBytes + kSectionDescBytes * n_sections;
    for (uint32_t i = 0; i < n_sections; ++i) {
        SectionDesc d;
        d.kind = static_cast<SectionKind>(h.u16("section kind"));
        d.layer = h.u16("section layer");
        d.rows = h.u32("section rows");
        d.cols = h.u32("section cols");
        d.padded_rows = h.u32("section padded_rows");
        d.scale = h.f32("section scale");
        d.offset = h.u64("section offset");
        d.size = h.u64("section size");
        if (d.offset < prev_end) {
            std::ostringstream msg;
            msg << "section " << i << " (" << section_kind_name(d.kind) << ") at offset " << d.offset
                << " overlaps previous data ending at " << prev_end;
            throw FormatError(msg.str());
        }
        if (d.offset + d.size > bytes.size()) {
            std::ostringstream msg;
            msg << "section " << i << " (" << section_kind_name(d.kind) << ") ends at "
                << d.offset + d.size << ", past end of file (" << bytes.size() << " bytes)";
            throw FormatError(msg.str());
        }
        prev_end = d.offset + d.size;
        info.sections.push_back(d);
    }
    return info;
}

namespace {

PackedWeights packed_from_section(const FileInfo& info, const SectionDesc& d,
                                  std::span<const uint8_t> bytes, uint32_t exp_rows,
                                  uint32_t exp_cols) {
    std::ostringstream where;
    where << section_kind_name(d.kind) << " (layer " << d.layer << ")";
    if (d.rows != exp_rows || d.cols != exp_cols) {
        throw FormatError("section " + where.str() + ": unexpected logical shape");
    }
    PackedWeights pw;
    pw.params = info.params;
    pw.logical_rows = static_cast<int>(d.rows);
    pw.logical_cols = static_cast<int>(d.cols);
    pw.padded_rows = static_cast<int>(d.padded_rows);
    pw.weight_scale = d.scale;
    pw.ivec_bytes = info.params.ivec_bytes();

    const int stride = info.params.group_stride();
    if (pw.padded_rows < pw.logical_rows || pw.padded_rows % stride != 0 ||
        pw.padded_rows - pw.logical_rows >= stride) {
        throw FormatError("section " + where.str() + ": padded_rows is not the next multiple of t*g");
    }
    if (d.size != pw.payload_bytes()) {
        std::ostringstream msg;
        msg << "section " << where.str() << ": payload size " << d.size << " != expected "
            << pw.payload_bytes();
        throw FormatError(msg.str());
    }
    pw.indices.assign(bytes.begin() + d.offset, bytes.begin() + d.offset + d.size);
    pw.indices.resize(d.size + kIndexSlackBytes, 0);
    try {
        pw.validate();
    } catch (const FormatError& e) {
        throw FormatError("section " + where.str() + ": " + e.what());
    }
    return pw;
}

FloatVector floats_from_section(const SectionDesc& d, std::span<const uint8_t> bytes, size_t count) {
    if (d.size != count * 4) {
        throw FormatError(std::string("section ") + section_kind_name(d.kind) +
                          ": payload size mismatch");
    }
    FloatVector out(count);
    for (size_t i = 0; i < count; ++i) out[i] = f32_at(bytes, d.offset + 4 * i);
    return out;
}

}  // namespace

ModelWeights load_model(std::span<const uint8_t> bytes) {
    const FileInfo info = inspect_file(bytes);
    const ModelConfig& cfg = info.config;

    ModelWeights mw;
    mw.config = cfg;
    mw.params = info.params;
    mw.layers.resize(cfg.n_layers);

    size_t si = 0;
    auto next = [&](SectionKind kind, uint16_t layer) -> const SectionDesc& {
        const SectionDesc& d = info.sections[si++];
        if (d.kind != kind || d.layer != layer) {
            std::ostringstream msg;
            msg << "section " << si - 1 << ": expected " << section_kind_name(kind) << " (layer "
                << layer << "), found " << section_kind_name(d.kind) << " (layer " << d.layer << ")";
            throw FormatError(msg.str());
        }
        return d;
    };

    {
        const SectionDesc& d = next(SectionKind::embedding, 0xffff);
        if (d.rows != static_cast<uint32_t>(cfg.vocab) || d.cols != static_cast<uint32_t>(cfg.d_model)) {
            throw FormatError("embedding section: unexpected shape");
        }
        mw.embedding = FloatMatrix(cfg.vocab, cfg.d_model);
        mw.embedding.v = floats_from_section(d, bytes, static_cast<size_t>(cfg.vocab) * cfg.d_model);
    }

    for (uint16_t li = 0; li < mw.layers.size(); ++li) {
        LayerWeights& l = mw.layers[li];
        l.wq = packed_from_section(info, next(SectionKind::wq, li), bytes, cfg.d_model, cfg.d_model);
        l.wk = packed_from_section(info, next(SectionKind::wk, li), bytes, cfg.d_model, cfg.d_model);
        l.wv = packed_from_section(info, next(SectionKind::wv, li), bytes, cfg.d_model, cfg.d_model);
        l.wo = packed_from_section(info, next(SectionKind::wo, li), bytes, cfg.d_model, cfg.d_model);
        l.w_gate =
            packed_from_section(info, next(SectionKind::w_gate, li), bytes, cfg.d_model, cfg.d_ffn);
        l.w_up = packed_from_section(info, next(SectionKind::w_up, li), bytes, cfg.d_model, cfg.d_ffn);
        l.w_down =
            packed_from_section(info, next(SectionKind::w_down, li), bytes, cfg.d_ffn, cfg.d_model);
        l.rms1.gamma = floats_from_section(next(SectionKind::rms1, li), bytes, cfg.d_model);
        l.rms2.gamma = floats_from_section(next(SectionKind::rms2, li), bytes, cfg.d_model);
    }

    mw.final_norm.gamma = floats_from_section(next(SectionKind::final_norm, 0xffff), bytes, cfg.d_model);

    {
        const SectionDesc& d = next(SectionKind::lm_head_w, 0xffff);
        const size_t count = static_cast<size_t>(cfg.vocab) * cfg.d_model;
        if (d.size != count) {
            throw FormatError("lm_head_w section: payload size mismatch");
        }
        mw.lm_head.d_model = cfg.d_model;
        mw.lm_head.vocab = cfg.vocab;
        mw.lm_head.w.resize(count);
        std::memcpy(mw.lm_head.w.data(), bytes.data() + d.offset, count);
        mw.lm_head.scale =
            floats_from_section(next(SectionKind::lm_head_scale, 0xffff), bytes, cfg.vocab);
    }

    try {
        mw.validate();
    } catch (const std::exception& e) {
        throw FormatError(std::string("model validation failed: ") + e.what());
    }
    return mw;
}

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot open file: " + path);
    }
    f.seekg(0, std::ios::end);
    const std::streamoff size = f.tellg();
    f.seekg(0);
    std::vector<uint8_t> bytes(static_cast<size_t>(size));
    f.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!f) {
        throw std::runtime_error("short read: " + path);
    }
    return bytes;
}

void write_file(const std::string& path, std::span<const uint8_t> bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw std::runtime_error("cannot create file: " + path);
    }
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) {
        throw std::runtime_error("short write: " + path);
    }
}

}  // namespace tllm
