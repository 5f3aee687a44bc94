#include "levylab/field_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "levylab/errors.hpp"

namespace levylab {

namespace {

constexpr std::uint32_t kVersion = 1;

template <class T>
T to_le(T v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
        std::memcpy(&v, b, sizeof(T));
        return v;
    }
}

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
    }
    void magic(const char* m) { out_.write(m, 4); }
    template <class T>
    void put(T v) {
        v = to_le(v);
        out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void doubles(const std::vector<double>& v) {
        for (double x : v) put(x);
    }
    ~Writer() { out_.flush(); }

private:
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw std::runtime_error("cannot open " + path);
    }
    void magic(const char* m) {
        char b[4];
        in_.read(b, 4);
        if (!in_ || std::memcmp(b, m, 4) != 0) throw std::runtime_error(path_ + ": bad magic bytes");
        if (get<std::uint32_t>() != kVersion) throw std::runtime_error(path_ + ": unsupported version");
    }
    template <class T>
    T get() {
        T v;
        in_.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!in_) throw std::runtime_error(path_ + ": truncated file");
        return to_le(v);
    }
    std::vector<double> doubles(std::size_t n) {
        std::vector<double> v(n);
        for (auto& x : v) x = get<double>();
        return v;
    }

private:
    std::ifstream in_;
    std::string path_;
};

void put_grid(Writer& w, const Grid& g, std::uint64_t count) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(g.n));
    for (int d = 0; d < g.n; ++d) w.put<std::uint32_t>(static_cast<std::uint32_t>(g.points_per_dim));
    w.put<double>(g.side_length);
    w.put<std::uint64_t>(count);
}

Grid get_grid(Reader& r, std::uint64_t& count) {
    int n = static_cast<int>(r.get<std::uint32_t>());
    if (n < 1 || n > 3) throw std::runtime_error("field file: bad dimension");
    int N = static_cast<int>(r.get<std::uint32_t>());
    for (int d = 1; d < n; ++d)
        if (static_cast<int>(r.get<std::uint32_t>()) != N) throw std::runtime_error("field file: non-cubic grid");
    double L = r.get<double>();
    count = r.get<std::uint64_t>();
    return Grid(n, N, L);
}

}  // namespace

void write_field(const std::string& path, const SampledField& f) {
    Writer w(path);
    w.magic("LVLF");
    w.put<std::uint32_t>(kVersion);
    put_grid(w, f.grid, f.values.size());
    w.doubles(f.values);
}

SampledField read_field(const std::string& path) {
    Reader r(path);
    r.magic("LVLF");
    std::uint64_t count = 0;
    Grid g = get_grid(r, count);
    if (count != g.size()) throw GridMismatch(path + ": value count does not match grid");
    return SampledField(g, r.doubles(count));
}

void write_symbol(const std::string& path, const LevySymbol& s) {
    Writer w(path);
    w.magic("LVLS");
    w.put<std::uint32_t>(kVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.grid.n));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.grid.points_per_dim));
    w.put<double>(s.grid.side_length);
    w.put<double>(s.alpha);
    w.put<double>(s.delta);
    w.doubles(s.values);
}

LevySymbol read_symbol(const std::string& path) {
    Reader r(path);
    r.magic("LVLS");
    LevySymbol s;
    int n = static_cast<int>(r.get<std::uint32_t>());
    int N = static_cast<int>(r.get<std::uint32_t>());
    double L = r.get<double>();
    s.grid = Grid(n, N, L);
    s.alpha = r.get<double>();
    s.delta = r.get<double>();
    s.values = r.doubles(s.grid.size());
    s.kernel_id = "file:" + path;
    return s;
}

void write_velocity(const std::string& path, const VelocityField& v) {
    Writer w(path);
    w.magic("LVLV");
    w.put<std::uint32_t>(kVersion);
    put_grid(w, v.grid, static_cast<std::uint64_t>(v.grid.size()) * v.grid.n * v.time_nodes.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(v.grid.n));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(v.time_nodes.size()));
    w.doubles(v.time_nodes);
    for (const auto& comps : v.data)
        for (const auto& c : comps) w.doubles(c);
}

VelocityField read_velocity(const std::string& path) {
    Reader r(path);
    r.magic("LVLV");
    std::uint64_t count = 0;
    VelocityField v;
    v.grid = get_grid(r, count);
    int nc = static_cast<int>(r.get<std::uint32_t>());
    std::size_t nodes = r.get<std::uint32_t>();
    if (nc != v.grid.n || count != v.grid.size() * nc * nodes)
        throw GridMismatch(path + ": velocity header inconsistent");
    v.time_nodes = r.doubles(nodes);
    v.data.resize(nodes);
    for (auto& comps : v.data) {
        comps.resize(nc);
        for (auto& c : comps) c = r.doubles(v.grid.size());
    }
    v.generator = "file:" + path;
    return v;
}

}  // namespace levylab
