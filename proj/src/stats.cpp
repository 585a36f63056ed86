#include "hem/stats.hpp"
#include "hem/core.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>

namespace hem {

BatchMeans::BatchMeans(std::int64_t expected_samples, int batches) {
    batches_ = static_cast<int>(std::min<std::int64_t>(batches, expected_samples));
    if (batches_ < 2) throw ParamError("arrivals too small to leave 2 post-warmup batches");
    batch_size_ = expected_samples / batches_;
    means_.reserve(static_cast<std::size_t>(batches_));
}

void BatchMeans::add(double x) {
    ++n_;
    total_ += x;
    // Samples past the last full batch count toward the mean only.
    if (static_cast<int>(means_.size()) == batches_) return;
    current_ += x;
    if (++in_current_ == batch_size_) {
        means_.push_back(static_cast<double>(current_ / batch_size_));
        current_ = 0.0L;
        in_current_ = 0;
    }
}

double BatchMeans::mean() const { return n_ ? static_cast<double>(total_ / n_) : 0.0; }

double BatchMeans::std_error() const {
    const auto k = means_.size();
    if (k < 2) return 0.0;
    long double m = 0.0L;
    for (double x : means_) m += x;
    m /= static_cast<long double>(k);
    long double ss = 0.0L;
    for (double x : means_) ss += (x - m) * (x - m);
    return static_cast<double>(std::sqrt(ss / static_cast<long double>(k - 1) / static_cast<long double>(k)));
}

double BatchMeans::half_width() const {
    const int k = static_cast<int>(means_.size());
    return k < 2 ? 0.0 : student_t_975(k - 1) * std_error();
}

double student_t_975(int dof) {
    boost::math::students_t dist(dof);
    return boost::math::quantile(dist, 0.975);
}

}  // namespace hem
