#pragma once

#include <cstdint>
#include <vector>

namespace hem {

/// Running mean with non-overlapping batch means over a known sample count.
class BatchMeans {
public:
    /// Throws ParamError when fewer than 2 batches fit.
    BatchMeans(std::int64_t expected_samples, int batches = 20);

    void add(double x);

    std::int64_t count() const { return n_; }
    double mean() const;
    /// Standard error of the mean from the batch means.
    double std_error() const;
    /// 95% half-width, Student t with batches-1 degrees of freedom.
    double half_width() const;
    int batches() const { return batches_; }

private:
    int batches_;
    std::int64_t batch_size_;
    std::int64_t n_ = 0;
    long double total_ = 0.0L;
    long double current_ = 0.0L;
    std::int64_t in_current_ = 0;
    std::vector<double> means_;
};

double student_t_975(int dof);

}  // namespace hem
