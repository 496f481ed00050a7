#include "racebo/sobol.hpp"

#include <stdexcept>

namespace racebo {

namespace {

constexpr int kBits = 52;

struct DimSpec {
    int degree;
    uint64_t poly;                 // coefficients a of the primitive polynomial
    std::initializer_list<uint64_t> m;
};

// first dimensions of the Joe-Kuo table (dimension 1 is van der Corput)
const DimSpec kSpecs[] = {
    {1, 0, {1}},
    {2, 1, {1, 3}},
    {3, 1, {1, 3, 1}},
    {3, 2, {1, 1, 1}},
    {4, 1, {1, 1, 3, 3}},
};

}  // namespace

SobolSequence::SobolSequence(int dim) : dim_(dim) {
    if (dim < 1 || dim > 6) throw std::runtime_error("sobol supports 1..6 dimensions");
    dirs_.assign(dim, std::vector<uint64_t>(kBits, 0));
    state_.assign(dim, 0);

    // dimension 0: van der Corput in base 2
    for (int k = 0; k < kBits; ++k) dirs_[0][k] = 1ULL << (kBits - 1 - k);

    for (int d = 1; d < dim; ++d) {
        const DimSpec& spec = kSpecs[d - 1];
        const int s = spec.degree;
        std::vector<uint64_t> m(spec.m);
        auto& v = dirs_[d];
        for (int k = 0; k < s && k < kBits; ++k) v[k] = m[k] << (kBits - 1 - k);
        for (int k = s; k < kBits; ++k) {
            uint64_t val = v[k - s] ^ (v[k - s] >> s);
            for (int i = 1; i < s; ++i)
                if ((spec.poly >> (s - 1 - i)) & 1ULL) val ^= v[k - i];
            v[k] = val;
        }
    }
}

std::vector<double> SobolSequence::point(uint64_t index) const {
    // Gray-code form evaluated from scratch
    std::vector<uint64_t> acc(dim_, 0);
    const uint64_t gray = index ^ (index >> 1);
    for (int b = 0; b < kBits; ++b) {
        if ((gray >> b) & 1ULL)
            for (int d = 0; d < dim_; ++d) acc[d] ^= dirs_[d][b];
    }
    std::vector<double> out(dim_);
    for (int d = 0; d < dim_; ++d)
        out[d] = static_cast<double>(acc[d]) / static_cast<double>(1ULL << kBits);
    return out;
}

std::vector<double> SobolSequence::next() {
    ++index_;
    // lowest zero bit of the previous index drives the Gray-code update
    uint64_t c = 0;
    uint64_t v = index_ - 1;
    while (v & 1ULL) {
        v >>= 1;
        ++c;
    }
    for (int d = 0; d < dim_; ++d) state_[d] ^= dirs_[d][c];
    std::vector<double> out(dim_);
    for (int d = 0; d < dim_; ++d)
        out[d] = static_cast<double>(state_[d]) / static_cast<double>(1ULL << kBits);
    return out;
}

}  // namespace racebo
