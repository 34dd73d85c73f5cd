#include "lre/store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace lre {

namespace {

constexpr std::size_t kIdLenMax = 65535;

class BinaryReader {
public:
    BinaryReader(const std::string& path, const char* magic) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open " + path);
        char buf[4];
        if (!in_.read(buf, 4)) throw CorruptionError(path + ": truncated header");
        if (std::memcmp(buf, magic, 4) != 0) {
            throw FormatError(path + ": bad magic, expected " + std::string(magic, 4));
        }
    }

    void read_bytes(void* dst, std::size_t n) {
        if (!in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n))) {
            throw CorruptionError(path_ + ": truncated file");
        }
    }

    std::uint16_t read_u16() { return static_cast<std::uint16_t>(read_le(2)); }
    std::uint32_t read_u32() { return static_cast<std::uint32_t>(read_le(4)); }
    std::uint64_t read_u64() { return read_le(8); }

    float read_f32() {
        const std::uint32_t bits = read_u32();
        float f;
        std::memcpy(&f, &bits, 4);
        return f;
    }

    std::string read_id() {
        const std::uint16_t len = read_u16();
        std::string id(len, '\0');
        if (len > 0) read_bytes(id.data(), len);
        return id;
    }

    void expect_eof() {
        in_.peek();
        if (!in_.eof()) throw CorruptionError(path_ + ": trailing bytes after declared payload");
    }

private:
    std::uint64_t read_le(int n) {
        unsigned char buf[8];
        read_bytes(buf, static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = n - 1; i >= 0; --i) v = (v << 8) | buf[i];
        return v;
    }

    std::string path_;
    std::ifstream in_;
};

class BinaryWriter {
public:
    BinaryWriter(const std::string& path, const char* magic) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot open " + path + " for writing");
        out_.write(magic, 4);
    }

    void write_bytes(const void* src, std::size_t n) {
        out_.write(static_cast<const char*>(src), static_cast<std::streamsize>(n));
    }

    void write_u16(std::uint16_t v) { write_le(v, 2); }
    void write_u32(std::uint32_t v) { write_le(v, 4); }
    void write_u64(std::uint64_t v) { write_le(v, 8); }

    void write_f32(float f) {
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        write_u32(bits);
    }

    void write_id(const ImageId& id) {
        if (id.size() > kIdLenMax) {
            throw ValidationError("image id longer than 65535 bytes: \"" + id.substr(0, 32) + "...\"");
        }
        write_u16(static_cast<std::uint16_t>(id.size()));
        write_bytes(id.data(), id.size());
    }

    void finish() {
        out_.flush();
        if (!out_) throw IoError("write failed: " + path_);
    }

private:
    void write_le(std::uint64_t v, int n) {
        unsigned char buf[8];
        for (int i = 0; i < n; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
        write_bytes(buf, static_cast<std::size_t>(n));
    }

    std::string path_;
    std::ofstream out_;
};

// Reads logical CSV lines, tolerating a trailing '\r' and tracking line
// numbers for error messages.
class CsvReader {
public:
    explicit CsvReader(const std::string& path) : path_(path), in_(path) {
        if (!in_) throw IoError("cannot open " + path);
    }

    bool next(std::string& line) {
        if (!std::getline(in_, line)) return false;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++line_no_;
        return true;
    }

    void expect_header(const std::string& header) {
        std::string line;
        if (!next(line) || line != header) {
            throw ParseError(path_ + ":1: expected header \"" + header + "\"");
        }
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(path_ + ":" + std::to_string(line_no_) + ": " + what);
    }

    std::size_t line_no() const { return line_no_; }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ifstream in_;
    std::size_t line_no_ = 0;
};

std::vector<ImageId> split_ids(const std::string& field) {
    std::vector<ImageId> out;
    std::size_t start = 0;
    while (start < field.size()) {
        std::size_t end = field.find(' ', start);
        if (end == std::string::npos) end = field.size();
        if (end > start) out.emplace_back(field.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

} // namespace

DescriptorSet load_descriptors(const std::string& path, Role role) {
    BinaryReader in(path, "GDS1");
    const std::uint32_t dim = in.read_u32();
    if (dim == 0) throw ValidationError(path + ": descriptor dimension must be >= 1");
    const std::uint64_t count = in.read_u64();
    DescriptorSet set(dim, role);
    std::vector<float> values(dim);
    for (std::uint64_t r = 0; r < count; ++r) {
        const std::string id = in.read_id();
        for (std::uint32_t d = 0; d < dim; ++d) values[d] = in.read_f32();
        set.add(id, values);
    }
    in.expect_eof();
    set.normalize_all();
    return set;
}

void save_descriptors(const DescriptorSet& set, const std::string& path) {
    BinaryWriter out(path, "GDS1");
    out.write_u32(set.dim());
    out.write_u64(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        out.write_id(set.id(i));
        for (const float v : set.row(i)) out.write_f32(v);
    }
    out.finish();
}

LocalFeatureSet load_local_features(const std::string& path) {
    BinaryReader in(path, "GLF1");
    const std::uint32_t dim = in.read_u32();
    if (dim == 0) throw ValidationError(path + ": local descriptor dimension must be >= 1");
    const std::uint64_t count = in.read_u64();
    LocalFeatureSet set(dim);
    for (std::uint64_t r = 0; r < count; ++r) {
        const std::string id = in.read_id();
        const std::uint32_t n = in.read_u32();
        std::vector<Keypoint> kps(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            kps[i].x = in.read_f32();
            kps[i].y = in.read_f32();
            kps[i].desc.resize(dim);
            for (std::uint32_t d = 0; d < dim; ++d) kps[i].desc[d] = in.read_f32();
        }
        set.add(id, std::move(kps));
    }
    in.expect_eof();
    return set;
}

void save_local_features(const LocalFeatureSet& set, const std::string& path) {
    BinaryWriter out(path, "GLF1");
    out.write_u32(set.dim());
    out.write_u64(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        out.write_id(set.ids()[i]);
        const auto& kps = set.keypoints(i);
        out.write_u32(static_cast<std::uint32_t>(kps.size()));
        for (const Keypoint& kp : kps) {
            out.write_f32(kp.x);
            out.write_f32(kp.y);
            for (const float v : kp.desc) out.write_f32(v);
        }
    }
    out.finish();
}

LabelTable load_labels(const std::string& path) {
    CsvReader in(path);
    in.expect_header("id,landmark_id");
    LabelTable table;
    std::string line;
    while (in.next(line)) {
        if (line.empty()) in.fail("empty row");
        const std::size_t comma = line.find(',');
        if (comma == std::string::npos) in.fail("expected \"id,landmark_id\"");
        const std::string id = line.substr(0, comma);
        LabelTable::Label label = 0;
        const char* first = line.data() + comma + 1;
        const char* last = line.data() + line.size();
        const auto [ptr, ec] = std::from_chars(first, last, label);
        if (ec != std::errc() || ptr != last) in.fail("malformed label value");
        try {
            table.add(id, label);
        } catch (const ValidationError&) {
            throw; // duplicates and bad ids are validation errors, not parse errors
        }
    }
    return table;
}

void save_labels(const LabelTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "id,landmark_id\n";
    for (const ImageId& id : table.ids()) {
        out << id << ',' << *table.find(id) << '\n';
    }
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

GroundTruth load_ground_truth(const std::string& path) {
    CsvReader in(path);
    in.expect_header("id,images");
    GroundTruth truth;
    std::string line;
    while (in.next(line)) {
        if (line.empty()) in.fail("empty row");
        const std::size_t comma = line.find(',');
        if (comma == std::string::npos) in.fail("expected \"id,images\"");
        ImageId id = line.substr(0, comma);
        require_valid_image_id(id);
        std::vector<ImageId> images = split_ids(line.substr(comma + 1));
        for (const ImageId& img : images) require_valid_image_id(img);
        std::sort(images.begin(), images.end());
        images.erase(std::unique(images.begin(), images.end()), images.end());
        if (!truth.entries.emplace(std::move(id), std::move(images)).second) {
            throw ValidationError(path + ": duplicate query row at line " + std::to_string(in.line_no()));
        }
    }
    return truth;
}

void save_ground_truth(const GroundTruth& truth, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "id,images\n";
    for (const auto& [id, images] : truth.entries) {
        out << id << ',';
        for (std::size_t i = 0; i < images.size(); ++i) {
            if (i > 0) out << ' ';
            out << images[i];
        }
        out << '\n';
    }
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

void save_submission(const std::vector<SubmissionRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "id,images\n";
    for (const auto& [id, images] : rows) {
        out << id << ',';
        for (std::size_t i = 0; i < images.size(); ++i) {
            if (i > 0) out << ' ';
            out << images[i];
        }
        out << '\n';
    }
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

std::vector<SubmissionRow> load_submission(const std::string& path) {
    CsvReader in(path);
    in.expect_header("id,images");
    std::vector<SubmissionRow> rows;
    std::unordered_set<ImageId> seen;
    std::string line;
    while (in.next(line)) {
        if (line.empty()) in.fail("empty row");
        const std::size_t comma = line.find(',');
        if (comma == std::string::npos) in.fail("expected \"id,images\"");
        ImageId id = line.substr(0, comma);
        require_valid_image_id(id);
        if (!seen.insert(id).second) {
            throw ValidationError(path + ": duplicate query row at line " + std::to_string(in.line_no()));
        }
        std::vector<ImageId> images = split_ids(line.substr(comma + 1));
        std::unordered_set<ImageId> unique;
        for (const ImageId& img : images) {
            require_valid_image_id(img);
            if (!unique.insert(img).second) {
                throw ValidationError(path + ": duplicate ranked id \"" + img + "\" at line " +
                                      std::to_string(in.line_no()));
            }
        }
        rows.emplace_back(std::move(id), std::move(images));
    }
    return rows;
}

} // namespace lre
