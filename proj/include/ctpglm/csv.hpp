#pragma once

#include "error.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace ctpglm::csv {

struct Table
{
	std::vector<std::string> header;
	std::vector<std::vector<std::string>> rows;
	std::vector<std::size_t> line; // source line of each row

	std::size_t column(const std::string& name) const
	{
		for (std::size_t i = 0; i < header.size(); ++i)
			if (header[i] == name)
				return i;
		throw DataError("missing CSV column '" + name + "'");
	}
};

inline std::string trim(std::string s)
{
	auto first = s.find_first_not_of(" \t\r");
	if (first == std::string::npos)
		return {};
	auto last = s.find_last_not_of(" \t\r");
	return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split(const std::string& line)
{
	std::vector<std::string> out;
	std::string cell;
	std::istringstream in(line);
	while (std::getline(in, cell, ','))
		out.push_back(trim(cell));
	if (!line.empty() && line.back() == ',')
		out.emplace_back();
	return out;
}

/// Plain comma-separated text with a header row; quoting is not supported.
inline Table parse(std::istream& in, const std::string& where)
{
	Table t;
	std::string line;
	std::size_t n = 0;
	while (std::getline(in, line)) {
		++n;
		if (trim(line).empty())
			continue;
		if (line.find('"') != std::string::npos)
			throw DataError(where + ":" + std::to_string(n) + ": quoted CSV fields are not supported");
		auto cells = split(line);
		if (t.header.empty()) {
			t.header = std::move(cells);
			continue;
		}
		if (cells.size() != t.header.size())
			throw DataError(where + ":" + std::to_string(n) + ": expected " + std::to_string(t.header.size()) + " fields, got " +
							std::to_string(cells.size()));
		t.rows.push_back(std::move(cells));
		t.line.push_back(n);
	}
	if (t.header.empty())
		throw DataError(where + ": empty CSV file");
	return t;
}

inline Table read(const std::filesystem::path& path)
{
	std::ifstream in(path);
	if (!in)
		throw DataError("cannot open '" + path.string() + "'");
	return parse(in, path.string());
}

inline double to_double(const std::string& s, const std::string& where)
{
	double v = 0.0;
	auto res = std::from_chars(s.data(), s.data() + s.size(), v);
	if (res.ec != std::errc() || res.ptr != s.data() + s.size())
		throw DataError(where + ": not a number: '" + s + "'");
	return v;
}

/// Shortest text that reads back as the same double.
inline std::string format(double v)
{
	if (std::isnan(v))
		return "nan";
	if (std::isinf(v))
		return v > 0 ? "inf" : "-inf";
	char buf[64];
	auto res = std::to_chars(buf, buf + sizeof buf, v);
	return std::string(buf, res.ptr);
}

} // namespace ctpglm::csv
