#pragma once

// Uniform access to the dynamic injection devices (generators and inverters).

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pst/generator.hpp"
#include "pst/inverter.hpp"

namespace pst {

using DynamicDevice = std::variant<DynamicGenerator, DynamicInverter>;

const std::string& device_name(const DynamicDevice& d);
int device_bus(const DynamicDevice& d);
double device_base(const DynamicDevice& d);
References& device_refs(DynamicDevice& d);
const References& device_refs(const DynamicDevice& d);

std::size_t n_states(const DynamicDevice& d);
std::vector<std::string> state_names(const DynamicDevice& d);
std::vector<bool> differential_mask(const DynamicDevice& d);

/// Writes f (differential rows) or g (algebraic rows) into out and returns the
/// injected current on the device MVA base.
Complex device_residual(const DynamicDevice& d, std::span<const double> x, Complex v_bus,
                        double omega_b, std::span<double> out);

}  // namespace pst
