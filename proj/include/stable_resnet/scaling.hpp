#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "error.hpp"

namespace sresnet {

enum class ScalingKind { unscaled, uniform, decreasing, custom };

struct ScalingScheme {
    ScalingKind kind = ScalingKind::unscaled;
    std::vector<double> custom_values;

    static ScalingScheme unscaled() { return {ScalingKind::unscaled, {}}; }
    static ScalingScheme uniform() { return {ScalingKind::uniform, {}}; }
    static ScalingScheme decreasing() { return {ScalingKind::decreasing, {}}; }
    static ScalingScheme custom(std::vector<double> values)
    {
        for (std::size_t i = 0; i < values.size(); ++i)
            if (!(values[i] > 0.0 && values[i] <= 1e6))
                throw ContractError("custom scaling: value " + std::to_string(i + 1) + " outside (0, 1e6]");
        return {ScalingKind::custom, std::move(values)};
    }

    // lambda does not depend on the total depth
    bool depth_free() const { return kind != ScalingKind::uniform; }
};

inline std::string to_string(const ScalingScheme& s)
{
    switch (s.kind) {
    case ScalingKind::unscaled: return "unscaled";
    case ScalingKind::uniform: return "uniform";
    case ScalingKind::decreasing: return "decreasing";
    case ScalingKind::custom: return "custom";
    }
    return "?";
}

inline double decreasing_lambda(long l)
{
    const double x = static_cast<double>(l);
    return 1.0 / (std::sqrt(x) * std::log(x + 1.0));
}

inline double lambda_at(const ScalingScheme& s, long l, long L)
{
    if (l < 1 || l > L)
        throw IndexError("lambda_at: need 1 <= l <= L, got l=" + std::to_string(l) + " L=" + std::to_string(L));
    switch (s.kind) {
    case ScalingKind::unscaled: return 1.0;
    case ScalingKind::uniform: return 1.0 / std::sqrt(static_cast<double>(L));
    case ScalingKind::decreasing: return decreasing_lambda(l);
    case ScalingKind::custom:
        if (static_cast<std::size_t>(l) > s.custom_values.size())
            throw IndexError("lambda_at: custom scaling has only " + std::to_string(s.custom_values.size()) +
                             " values, layer " + std::to_string(l) + " requested");
        return s.custom_values[l - 1];
    }
    return 1.0;
}

inline std::vector<double> lambdas(const ScalingScheme& s, long L)
{
    std::vector<double> out(L);
    for (long l = 1; l <= L; ++l)
        out[l - 1] = lambda_at(s, l, L);
    return out;
}

inline double sum_lambda_sq(const ScalingScheme& s, long L)
{
    if (L < 1)
        throw IndexError("sum_lambda_sq: L must be >= 1");
    if (s.kind == ScalingKind::unscaled)
        return static_cast<double>(L);
    if (s.kind == ScalingKind::uniform)
        return 1.0;
    double acc = 0.0;
    for (long l = 1; l <= L; ++l) {
        const double v = lambda_at(s, l, L);
        acc += v * v;
    }
    return acc;
}

// sum_{k > M} lambda_k^2 for the decreasing scheme: explicit terms up to a
// cutoff, then the integral of 1/(x ln^2(x+1)) with a half-term correction.
inline double decreasing_tail_sq(long M)
{
    if (M < 1)
        throw IndexError("decreasing_tail_sq: M must be >= 1");
    const long cut = std::max<long>(M, 1L << 20);
    double head = 0.0;
    for (long k = cut; k > M; --k) {
        const double v = decreasing_lambda(k);
        head += v * v;
    }
    const double a = static_cast<double>(cut);
    const double lg = std::log(a + 1.0);
    const double integral = 1.0 / lg + (1.0 - 2.0 / lg) / (a * lg * lg);
    return head + integral - 0.5 / (a * lg * lg);
}

inline bool is_stable(const ScalingScheme& s, const std::vector<long>& probe_depths)
{
    if (probe_depths.empty())
        throw ContractError("is_stable: probe_depths must be non-empty");
    for (std::size_t i = 1; i < probe_depths.size(); ++i)
        if (probe_depths[i] <= probe_depths[i - 1])
            throw ContractError("is_stable: probe_depths must be increasing");
    switch (s.kind) {
    case ScalingKind::unscaled: return false;
    case ScalingKind::uniform:
    case ScalingKind::decreasing: return true;
    case ScalingKind::custom: break;
    }
    const long top = probe_depths.back();
    const long half = std::max<long>(1, top / 2);
    const double a = sum_lambda_sq(s, half);
    const double b = sum_lambda_sq(s, top);
    return b <= a * 1.01;
}

inline ScalingScheme load_custom_scheme(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("custom scaling file not found: " + path);
    std::vector<double> values;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            values.push_back(std::stod(line));
        } catch (const std::exception&) {
            throw ContractError(path + ":" + std::to_string(lineno) + ": not a number: " + line);
        }
    }
    if (values.empty())
        throw ContractError("custom scaling file is empty: " + path);
    return ScalingScheme::custom(std::move(values));
}

// unscaled | uniform | decreasing | custom:<path>
inline ScalingScheme parse_scheme(const std::string& text)
{
    if (text == "unscaled")
        return ScalingScheme::unscaled();
    if (text == "uniform")
        return ScalingScheme::uniform();
    if (text == "decreasing")
        return ScalingScheme::decreasing();
    if (text.rfind("custom:", 0) == 0)
        return load_custom_scheme(text.substr(7));
    throw ContractError("unknown scaling '" + text + "' (expected unscaled, uniform, decreasing or custom:<path>)");
}

} // namespace sresnet
