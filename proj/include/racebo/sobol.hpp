#pragma once

#include <cstdint>
#include <vector>

namespace racebo {

// Sobol low-discrepancy sequence (Gray-code construction, Joe-Kuo direction
// numbers) for up to 6 dimensions. Index 0 is the origin; initialization
// schemes usually start from index 1.
class SobolSequence {
public:
    explicit SobolSequence(int dim);

    // point with the given index (deterministic random access)
    std::vector<double> point(uint64_t index) const;

    // next point of the internal counter, starting at index 1
    std::vector<double> next();

    int dim() const { return dim_; }

private:
    int dim_;
    uint64_t index_ = 0;
    std::vector<uint64_t> state_;
    std::vector<std::vector<uint64_t>> dirs_;  // direction numbers per dimension
};

}  // namespace racebo
