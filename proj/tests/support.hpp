// shared test helpers: central finite-difference gradient checking and
// throwaway directories
#pragma once

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <cmath>

namespace testsupport {

// max relative error between an analytic gradient and a central finite
// difference of `loss`, step 1e-5
inline double gradient_max_rel_err(
    const std::function<double(const std::vector<double>&)>& loss,
    const std::vector<double>& params, const std::vector<double>& analytic,
    double step = 1e-5) {
    double worst = 0.0;
    std::vector<double> p = params;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double keep = p[i];
        p[i] = keep + step;
        const double hi = loss(p);
        p[i] = keep - step;
        const double lo = loss(p);
        p[i] = keep;
        const double fd = (hi - lo) / (2.0 * step);
        const double rel =
            std::abs(fd - analytic[i]) / std::max(1e-6, std::abs(fd) + std::abs(analytic[i]));
        worst = std::max(worst, rel);
    }
    return worst;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("roadsafe_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    std::string str() const { return path_.string(); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

} // namespace testsupport
