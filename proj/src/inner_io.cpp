#include "ropo/inner_io.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <sstream>

namespace ropo {

namespace {

double parse_number(const std::string& token, std::size_t line, const std::string& field) {
    double value = 0.0;
    const auto result = std::from_chars(token.data(), token.data() + token.size(), value);
    if (result.ec != std::errc() || result.ptr != token.data() + token.size())
        throw ParseError("field '" + field + "': '" + token + "' is not a number", line);
    return value;
}

std::size_t parse_index(const std::string& token, std::size_t line, const std::string& field) {
    std::size_t value = 0;
    const auto result = std::from_chars(token.data(), token.data() + token.size(), value);
    if (result.ec != std::errc() || result.ptr != token.data() + token.size())
        throw ParseError("field '" + field + "': '" + token + "' is not a nonnegative integer", line);
    return value;
}

std::string fixed12(double v) {
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.12f", v);
    return buffer;
}

} // namespace

InnerProblemText parse_inner_problem(std::istream& in) {
    InnerProblemText text;
    bool have_kind = false, have_radius = false;
    std::size_t line_no = 0;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream fields(line);
        std::string key;
        if (!(fields >> key)) continue;
        std::vector<std::string> args;
        for (std::string t; fields >> t;) args.push_back(t);
        auto single = [&]() -> const std::string& {
            if (args.size() != 1) throw ParseError("field '" + key + "' takes exactly one value", line_no);
            return args.front();
        };

        if (key == "kind") {
            try {
                text.set.kind = uncertainty_kind_from_string(single());
            } catch (const ConfigError& e) {
                throw ParseError(std::string("field 'kind': ") + e.what(), line_no);
            }
            have_kind = true;
        } else if (key == "radius") {
            text.set.radius = parse_number(single(), line_no, key);
            have_radius = true;
        } else if (key == "value") {
            if (!text.value.empty()) throw ParseError("field 'value' given twice", line_no);
            for (const auto& a : args) text.value.push_back(parse_number(a, line_no, key));
            if (text.value.empty()) throw ParseError("field 'value' is empty", line_no);
        } else if (key == "nominal") {
            if (args.empty()) throw ParseError("field 'nominal' is empty", line_no);
            if (text.actions > 0 && args.size() * text.actions != text.nominal.size())
                throw ParseError("nominal rows have different lengths", line_no);
            for (const auto& a : args) text.nominal.push_back(parse_number(a, line_no, key));
            ++text.actions;
        } else if (key == "action") {
            text.action = parse_index(single(), line_no, key);
        } else if (key == "method") {
            const std::string& m = single();
            if (m == "level_set") text.l1s.method = L1sMethod::level_set;
            else if (m == "subgradient") text.l1s.method = L1sMethod::subgradient;
            else throw ParseError("field 'method': unknown method '" + m + "'", line_no);
        } else {
            throw ParseError("unknown field '" + key + "'", line_no);
        }
    }
    if (!have_kind) throw ParseError("missing field 'kind'");
    if (!have_radius) throw ParseError("missing field 'radius'");
    if (text.value.empty()) throw ParseError("missing field 'value'");
    if (text.actions == 0) throw ParseError("missing field 'nominal'");
    if (text.nominal.size() != text.actions * text.value.size())
        throw ParseError("nominal rows and value have different lengths");
    if (text.set.kind != UncertaintyKind::l1_s && text.actions != 1)
        throw ParseError("only l1_s problems take more than one nominal row");
    if (text.action >= text.actions) throw ParseError("field 'action' is out of range");
    return text;
}

std::string format_inner_result(const DualSolverResult& result) {
    std::string out = "sigma " + fixed12(result.sigma) + "\ndual_point";
    for (double d : result.dual_point) out += " " + fixed12(d);
    out += "\niterations " + std::to_string(result.iterations) + "\nresidual " + fixed12(result.residual) +
           "\n";
    return out;
}

} // namespace ropo
