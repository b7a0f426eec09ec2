#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace paraopt {

/// Closed-form period-1 coefficient presets. Keeping these analytic keeps
/// the provenance of every derived number analytic as well.
class PeriodicCoefficient1D {
public:
    enum class Preset { constant, sinusoidal, two_phase };

    /// a(y) = c
    static PeriodicCoefficient1D constant(double c) {
        return PeriodicCoefficient1D(Preset::constant, c, 0.0, 0.0, c, c);
    }

    /// a(y) = base + amplitude * sin(2 pi y)
    static PeriodicCoefficient1D sinusoidal(double base, double amplitude) {
        const double lo = base - std::abs(amplitude);
        const double hi = base + std::abs(amplitude);
        return PeriodicCoefficient1D(Preset::sinusoidal, base, amplitude, 0.0, lo, hi);
    }

    /// a(y) = a1 on [0, fraction), a2 on [fraction, 1). Not W^{2,inf};
    /// retained as a stress preset and flagged as such by `is_smooth`.
    static PeriodicCoefficient1D two_phase(double a1, double a2, double fraction) {
        if (!(fraction > 0.0 && fraction < 1.0))
            throw std::invalid_argument("two_phase: fraction must lie in (0,1)");
        return PeriodicCoefficient1D(Preset::two_phase, a1, a2, fraction, std::min(a1, a2),
                                     std::max(a1, a2));
    }

    double operator()(double y) const {
        y -= std::floor(y); // reduce to the period cell
        switch (preset_) {
            case Preset::constant: return p1_;
            case Preset::sinusoidal: return p1_ + p2_ * std::sin(2.0 * M_PI * y);
            case Preset::two_phase: return y < p3_ ? p1_ : p2_;
        }
        return p1_;
    }

    double m_low() const { return m_low_; }
    double m_high() const { return m_high_; }
    Preset preset() const { return preset_; }
    bool is_smooth() const { return preset_ != Preset::two_phase; }

private:
    PeriodicCoefficient1D(Preset preset, double p1, double p2, double p3, double lo, double hi)
        : preset_(preset), p1_(p1), p2_(p2), p3_(p3), m_low_(lo), m_high_(hi) {
        if (!(m_low_ > 0.0))
            throw std::invalid_argument("PeriodicCoefficient1D: coefficient must stay positive");
        // Dense sampling guard on the recorded bounds.
        for (int i = 0; i < 4096; ++i) {
            const double v = (*this)(i / 4096.0);
            if (v < m_low_ - 1e-12 || v > m_high_ + 1e-12)
                throw std::invalid_argument(
                    "PeriodicCoefficient1D: sampled value escapes recorded bounds");
        }
    }

    Preset preset_;
    double p1_, p2_, p3_;
    double m_low_, m_high_;
};

} // namespace paraopt
