#pragma once

#include <cctype>
#include <string>
#include <vector>

// Minimal well-formedness check sufficient for the generated SVG: every open
// tag is closed in order, attribute quotes are balanced, one root element.
inline bool xml_well_formed(const std::string& text) {
    std::vector<std::string> stack;
    std::size_t i = 0;
    int roots = 0;
    while (i < text.size()) {
        if (text[i] != '<') {
            if (text[i] == '>') return false;
            ++i;
            continue;
        }
        std::size_t end = i + 1;
        int quotes = 0;
        while (end < text.size() && (text[end] != '>' || quotes % 2 == 1)) {
            if (text[end] == '"') ++quotes;
            ++end;
        }
        if (end >= text.size() || quotes % 2 == 1) return false;
        const std::string tag = text.substr(i + 1, end - i - 1);
        if (tag.empty()) return false;
        if (tag.front() == '?') {
            if (tag.back() != '?') return false;
        } else if (tag.front() == '/') {
            if (stack.empty()) return false;
            std::string name = tag.substr(1);
            if (name != stack.back()) return false;
            stack.pop_back();
            if (stack.empty()) ++roots;
        } else if (tag.back() == '/') {
            if (stack.empty()) ++roots;
        } else {
            std::string name;
            for (const char c : tag) {
                if (std::isspace(static_cast<unsigned char>(c))) break;
                name.push_back(c);
            }
            stack.push_back(name);
        }
        i = end + 1;
    }
    return stack.empty() && roots >= 1;
}
