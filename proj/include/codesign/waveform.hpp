#pragma once

#include <span>
#include <vector>

namespace codesign {

/// A point where a waveform may have a kink. The propagator never steps across
/// a breakpoint, so it needs to know how the breakpoint moves with the
/// waveform's own parameters.
struct Breakpoint {
  double time = 0.0;
  std::vector<double> d_time;  ///< d time / d parameter, one entry per parameter
};

/// Scalar control field f(c, t) multiplying one control operator.
class Waveform {
 public:
  virtual ~Waveform() = default;

  virtual std::size_t num_params() const = 0;
  virtual double value(double t) const = 0;
  /// df/dt at fixed parameters, evaluated on the segment [seg_begin, seg_end].
  virtual double time_derivative(double t, double seg_begin, double seg_end) const = 0;
  /// grad += scale * df/dc at fixed t, evaluated on the given segment.
  virtual void accumulate_param_grad(double t, double seg_begin, double seg_end, double scale,
                                     std::span<double> grad) const = 0;
  /// Sorted breakpoints; the first is the start and the last the end of the pulse.
  virtual std::vector<Breakpoint> breakpoints() const = 0;
};

}  // namespace codesign
