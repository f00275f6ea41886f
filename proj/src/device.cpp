#include "pst/device.hpp"

namespace pst {

const std::string& device_name(const DynamicDevice& d) {
    return std::visit([](const auto& x) -> const std::string& { return x.name; }, d);
}

int device_bus(const DynamicDevice& d) {
    return std::visit([](const auto& x) { return x.bus; }, d);
}

double device_base(const DynamicDevice& d) {
    return std::visit([](const auto& x) { return x.base_MVA; }, d);
}

References& device_refs(DynamicDevice& d) {
    return std::visit([](auto& x) -> References& { return x.refs; }, d);
}

const References& device_refs(const DynamicDevice& d) {
    return std::visit([](const auto& x) -> const References& { return x.refs; }, d);
}

std::size_t n_states(const DynamicDevice& d) {
    if (const auto* g = std::get_if<DynamicGenerator>(&d)) {
        return layout(*g).size;
    }
    return InverterLayout::size;
}

std::vector<std::string> state_names(const DynamicDevice& d) {
    return std::visit([](const auto& x) { return state_names(x); }, d);
}

std::vector<bool> differential_mask(const DynamicDevice& d) {
    if (const auto* inv = std::get_if<DynamicInverter>(&d)) {
        return differential_mask(*inv);
    }
    return std::vector<bool>(n_states(d), true);
}

Complex device_residual(const DynamicDevice& d, std::span<const double> x, Complex v_bus,
                        double omega_b, std::span<double> out) {
    if (const auto* g = std::get_if<DynamicGenerator>(&d)) {
        return generator_residual(*g, x, v_bus, omega_b, out).i_inj;
    }
    return inverter_residual(std::get<DynamicInverter>(d), x, v_bus, omega_b, out).i_inj;
}

}  // namespace pst
