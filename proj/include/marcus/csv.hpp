/*
   Copyright 2026 The marcus-averaging Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <charconv>
#include <cmath>
#include <ostream>
#include <string>
#include <system_error>

namespace marcus {

// Shortest decimal text that parses back to the same double.
inline std::string format_double(double value)
{
    if (std::isnan(value)) {
        return "nan";
    }
    if (std::isinf(value)) {
        return value > 0 ? "inf" : "-inf";
    }
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    if (result.ec != std::errc{}) {
        return "nan";
    }
    return std::string(buffer, result.ptr);
}

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& os) : os_(os) {}

    CsvWriter& operator<<(double v)
    {
        separator();
        os_ << format_double(v);
        return *this;
    }
    CsvWriter& operator<<(int v) { return write_text(std::to_string(v)); }
    CsvWriter& operator<<(long v) { return write_text(std::to_string(v)); }
    CsvWriter& operator<<(unsigned long v) { return write_text(std::to_string(v)); }
    CsvWriter& operator<<(unsigned v) { return write_text(std::to_string(v)); }
    CsvWriter& operator<<(const std::string& s) { return write_text(s); }
    CsvWriter& operator<<(const char* s) { return write_text(s); }

    void end_row()
    {
        os_ << '\n';
        first_ = true;
    }

private:
    CsvWriter& write_text(const std::string& s)
    {
        separator();
        os_ << s;
        return *this;
    }
    void separator()
    {
        if (!first_) {
            os_ << ',';
        }
        first_ = false;
    }

    std::ostream& os_;
    bool first_ = true;
};

} // namespace marcus
