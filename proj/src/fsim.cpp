#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <numbers>
#include <vector>

#include "thermalsr/error.hpp"
#include "thermalsr/metrics.hpp"
#include "thermalsr/util.hpp"

namespace thermalsr {

namespace {

constexpr int kScales = 4;
constexpr int kOrients = 4;
constexpr double kMinWaveLength = 6.0;
constexpr double kMult = 2.0;
constexpr double kSigmaOnf = 0.55;
constexpr double kDThetaOnSigma = 1.2;
constexpr double kNoiseK = 2.0;
constexpr double kEpsilon = 1e-4;
constexpr double kT1 = 0.85;
constexpr double kT2 = 160.0;

// Planner calls are not thread-safe in FFTW; execution on distinct arrays is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

using cplx = std::complex<double>;

struct FftBuffer {
    explicit FftBuffer(std::size_t n) : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
        if (!data)
            throw std::bad_alloc();
    }
    ~FftBuffer() { fftw_free(data); }
    FftBuffer(const FftBuffer&) = delete;
    FftBuffer& operator=(const FftBuffer&) = delete;
    cplx* get() { return reinterpret_cast<cplx*>(data); }
    fftw_complex* data;
};

class FftPlan {
public:
    FftPlan(int rows, int cols, FftBuffer& in, FftBuffer& out, int sign) {
        std::lock_guard lock(planner_mutex());
        plan_ = fftw_plan_dft_2d(rows, cols, in.data, out.data, sign, FFTW_ESTIMATE);
        if (!plan_)
            throw Error("fftw plan creation failed");
    }
    ~FftPlan() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_);
    }
    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;
    void run() const { fftw_execute(plan_); }

private:
    fftw_plan plan_ = nullptr;
};

// Frequency coordinate of FFT bin k for an n-point axis, matching a centred
// grid of (-n/2 .. n/2-1)/n (even n) or (-(n-1)/2 .. (n-1)/2)/(n-1) (odd n)
// moved to FFT order.
double bin_frequency(int k, int n) {
    const int half = (n + 1) / 2;
    const double d = n % 2 == 0 ? n : std::max(1, n - 1);
    return (k < half ? k : k - n) / d;
}

double median(std::vector<double> v) {
    const std::size_t n = v.size();
    const std::size_t mid = n / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    const double upper = v[mid];
    if (n % 2 == 1)
        return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + mid);
    return 0.5 * (lower + upper);
}

// Mean over F x F blocks anchored like a zero-padded 'same' convolution, then
// keeping every F-th sample.
Plane downscale(const Plane& p, int f) {
    if (f <= 1)
        return p;
    const int off = (f - 1) - f / 2;
    const int w = (p.width + f - 1) / f;
    const int h = (p.height + f - 1) / f;
    Plane out{w, h, std::vector<double>(static_cast<std::size_t>(w) * h)};
    const double norm = 1.0 / (static_cast<double>(f) * f);
    for (int oy = 0; oy < h; ++oy) {
        for (int ox = 0; ox < w; ++ox) {
            const int cy = oy * f;
            const int cx = ox * f;
            double acc = 0.0;
            for (int dy = 0; dy < f; ++dy) {
                const int y = cy - off + dy;
                if (y < 0 || y >= p.height)
                    continue;
                for (int dx = 0; dx < f; ++dx) {
                    const int x = cx - off + dx;
                    if (x >= 0 && x < p.width)
                        acc += p.at(x, y);
                }
            }
            out.values[static_cast<std::size_t>(oy) * w + ox] = acc * norm;
        }
    }
    return out;
}

Plane gradient_magnitude(const Plane& p) {
    static constexpr double kx[3][3] = {{3, 0, -3}, {10, 0, -10}, {3, 0, -3}};
    Plane out{p.width, p.height, std::vector<double>(p.values.size())};
    for (int y = 0; y < p.height; ++y) {
        for (int x = 0; x < p.width; ++x) {
            double gx = 0.0, gy = 0.0;
            for (int dy = -1; dy <= 1; ++dy) {
                const int yy = y + dy;
                if (yy < 0 || yy >= p.height)
                    continue;
                for (int dx = -1; dx <= 1; ++dx) {
                    const int xx = x + dx;
                    if (xx < 0 || xx >= p.width)
                        continue;
                    const double v = p.at(xx, yy);
                    gx += kx[dy + 1][dx + 1] * v;
                    gy += kx[dx + 1][dy + 1] * v;
                }
            }
            gx /= 16.0;
            gy /= 16.0;
            out.values[static_cast<std::size_t>(y) * p.width + x] = std::sqrt(gx * gx + gy * gy);
        }
    }
    return out;
}

} // namespace

Plane phase_congruency(const Plane& img) {
    const int rows = img.height;
    const int cols = img.width;
    if (rows < 2 || cols < 2)
        throw ShapeError("phase congruency needs at least a 2x2 image");
    const std::size_t n = static_cast<std::size_t>(rows) * cols;

    FftBuffer spectrum(n), work(n), result(n);
    FftPlan forward(rows, cols, work, spectrum, FFTW_FORWARD);
    FftPlan inverse(rows, cols, work, result, FFTW_BACKWARD);

    for (std::size_t i = 0; i < n; ++i)
        work.get()[i] = cplx(img.values[i], 0.0);
    forward.run();

    std::vector<double> radius(n), sin_t(n), cos_t(n), lowpass(n);
    for (int r = 0; r < rows; ++r) {
        const double fy = bin_frequency(r, rows);
        for (int c = 0; c < cols; ++c) {
            const double fx = bin_frequency(c, cols);
            const std::size_t i = static_cast<std::size_t>(r) * cols + c;
            const double rad = std::sqrt(fx * fx + fy * fy);
            lowpass[i] = 1.0 / (1.0 + std::pow(rad / 0.45, 2.0 * 15.0));
            radius[i] = rad;
            const double theta = std::atan2(-fy, fx);
            sin_t[i] = std::sin(theta);
            cos_t[i] = std::cos(theta);
        }
    }
    radius[0] = 1.0;

    std::vector<std::vector<double>> log_gabor(kScales, std::vector<double>(n));
    const double log_sigma = std::log(kSigmaOnf);
    for (int s = 0; s < kScales; ++s) {
        const double wavelength = kMinWaveLength * std::pow(kMult, s);
        const double fo = 1.0 / wavelength;
        for (std::size_t i = 0; i < n; ++i) {
            const double l = std::log(radius[i] / fo);
            log_gabor[s][i] = std::exp(-(l * l) / (2.0 * log_sigma * log_sigma)) * lowpass[i];
        }
        log_gabor[s][0] = 0.0;
    }

    const double theta_sigma = std::numbers::pi / kOrients / kDThetaOnSigma;
    const double inv_n = 1.0 / static_cast<double>(n);

    std::vector<double> energy_all(n, 0.0), an_all(n, 0.0);
    std::vector<std::vector<cplx>> eo(kScales, std::vector<cplx>(n));
    std::vector<double> filter(n);

    for (int o = 0; o < kOrients; ++o) {
        const double angle = o * std::numbers::pi / kOrients;
        const double ca = std::cos(angle);
        const double sa = std::sin(angle);
        std::vector<double> spread(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double ds = sin_t[i] * ca - cos_t[i] * sa;
            const double dc = cos_t[i] * ca + sin_t[i] * sa;
            const double dtheta = std::abs(std::atan2(ds, dc));
            spread[i] = std::exp(-(dtheta * dtheta) / (2.0 * theta_sigma * theta_sigma));
        }

        std::vector<double> sum_e(n, 0.0), sum_o(n, 0.0), sum_an(n, 0.0);
        std::vector<std::vector<double>> ifft_filt(kScales, std::vector<double>(n));
        double em_n = 0.0;

        for (int s = 0; s < kScales; ++s) {
            for (std::size_t i = 0; i < n; ++i)
                filter[i] = log_gabor[s][i] * spread[i];

            for (std::size_t i = 0; i < n; ++i)
                work.get()[i] = cplx(filter[i], 0.0);
            inverse.run();
            const double root_n = std::sqrt(static_cast<double>(n));
            for (std::size_t i = 0; i < n; ++i)
                ifft_filt[s][i] = result.get()[i].real() * inv_n * root_n;

            for (std::size_t i = 0; i < n; ++i)
                work.get()[i] = spectrum.get()[i] * filter[i];
            inverse.run();
            for (std::size_t i = 0; i < n; ++i) {
                const cplx v = result.get()[i] * inv_n;
                eo[s][i] = v;
                const double an = std::abs(v);
                sum_an[i] += an;
                sum_e[i] += v.real();
                sum_o[i] += v.imag();
            }
            if (s == 0) {
                std::vector<double> f2(n);
                for (std::size_t i = 0; i < n; ++i)
                    f2[i] = filter[i] * filter[i];
                em_n = pairwise_sum(f2);
            }
        }

        std::vector<double> energy(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double mag = std::sqrt(sum_e[i] * sum_e[i] + sum_o[i] * sum_o[i]) + kEpsilon;
            const double me = sum_e[i] / mag;
            const double mo = sum_o[i] / mag;
            double e = 0.0;
            for (int s = 0; s < kScales; ++s) {
                const double re = eo[s][i].real();
                const double im = eo[s][i].imag();
                e += re * me + im * mo - std::abs(re * mo - im * me);
            }
            energy[i] = e;
        }

        // Noise threshold from the smallest-scale response statistics.
        std::vector<double> e2(n);
        for (std::size_t i = 0; i < n; ++i)
            e2[i] = std::norm(eo[0][i]);
        const double median_e2n = median(std::move(e2));
        const double mean_e2n = -median_e2n / std::log(0.5);
        const double noise_power = em_n > 0.0 ? mean_e2n / em_n : 0.0;

        std::vector<double> est_an2(n, 0.0), est_aiaj(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (int s = 0; s < kScales; ++s) {
                est_an2[i] += ifft_filt[s][i] * ifft_filt[s][i];
                for (int t = s + 1; t < kScales; ++t)
                    est_aiaj[i] += ifft_filt[s][i] * ifft_filt[t][i];
            }
        }
        const double sum_an2 = pairwise_sum(est_an2);
        const double sum_aiaj = pairwise_sum(est_aiaj);
        const double est_noise_energy2 = 2.0 * noise_power * sum_an2 + 4.0 * noise_power * sum_aiaj;
        const double tau = std::sqrt(est_noise_energy2 / 2.0);
        const double est_noise_energy = tau * std::sqrt(std::numbers::pi / 2.0);
        const double est_noise_sigma = std::sqrt((2.0 - std::numbers::pi / 2.0) * tau * tau);
        const double threshold = (est_noise_energy + kNoiseK * est_noise_sigma) / 1.7;

        for (std::size_t i = 0; i < n; ++i) {
            energy_all[i] += std::max(energy[i] - threshold, 0.0);
            an_all[i] += sum_an[i];
        }
    }

    Plane pc{cols, rows, std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i)
        pc.values[i] = an_all[i] > 0.0 ? energy_all[i] / an_all[i] : 0.0;
    return pc;
}

FsimValue fsim(const ImageBuffer& a, const ImageBuffer& b) {
    if (!a.same_shape(b))
        throw ShapeError("fsim: shape mismatch");
    if (a.bit_depth() != b.bit_depth())
        throw ShapeError("fsim: bit depth mismatch");

    const double to_8bit = 255.0 / a.max_value();
    Plane ya = to_luma(a);
    Plane yb = to_luma(b);
    for (double& v : ya.values)
        v *= to_8bit;
    for (double& v : yb.values)
        v *= to_8bit;

    const int f = std::max(1, static_cast<int>(std::lround(std::min(a.width(), a.height()) / 256.0)));
    ya = downscale(ya, f);
    yb = downscale(yb, f);

    const Plane pc1 = phase_congruency(ya);
    const Plane pc2 = phase_congruency(yb);
    const Plane g1 = gradient_magnitude(ya);
    const Plane g2 = gradient_magnitude(yb);

    const std::size_t n = pc1.values.size();
    std::vector<double> num(n), den(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double p1 = pc1.values[i];
        const double p2 = pc2.values[i];
        const double s_pc = (2.0 * (p1 * p2) + kT1) / (p1 * p1 + p2 * p2 + kT1);
        const double q1 = g1.values[i];
        const double q2 = g2.values[i];
        const double s_g = (2.0 * (q1 * q2) + kT2) / (q1 * q1 + q2 * q2 + kT2);
        const double pcm = std::max(p1, p2);
        num[i] = s_pc * s_g * pcm;
        den[i] = pcm;
    }
    const double total = pairwise_sum(den);
    if (total == 0.0)
        return {a == b ? 1.0 : std::numeric_limits<double>::quiet_NaN(), true};
    return {pairwise_sum(num) / total, false};
}

} // namespace thermalsr
