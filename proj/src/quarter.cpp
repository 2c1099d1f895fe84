#include "mpf/quarter.hpp"

#include <cctype>
#include <cstdio>

#include "mpf/errors.hpp"

namespace mpf {

std::string Quarter::str() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04dQ%d", year, q);
    return buf;
}

Quarter parse_quarter(const std::string& text) {
    // accepted form: YYYYQn, n in 1..4
    auto bad = [&]() -> SchemaError {
        return SchemaError("invalid quarter '" + text + "' (expected YYYYQn, n in 1..4)");
    };
    auto pos = text.find('Q');
    if (pos == std::string::npos || pos == 0 || pos + 2 != text.size()) throw bad();
    for (size_t i = 0; i < pos; ++i)
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) throw bad();
    if (!std::isdigit(static_cast<unsigned char>(text[pos + 1]))) throw bad();
    Quarter out;
    out.year = std::stoi(text.substr(0, pos));
    out.q = text[pos + 1] - '0';
    if (!out.valid()) throw bad();
    return out;
}

}  // namespace mpf
