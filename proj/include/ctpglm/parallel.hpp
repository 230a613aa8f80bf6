#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace ctpglm {

/**
 * Runs body(i) for i in [0, count) on at most `threads` workers. Each index is
 * handled by exactly one worker; callers write results into per-index slots
 * and reduce afterwards in index order. The first exception is rethrown.
 */
template <typename Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body)
{
	threads = std::max<std::size_t>(1, std::min(threads, count));
	if (threads == 1) {
		for (std::size_t i = 0; i < count; ++i)
			body(i);
		return;
	}
	std::vector<std::exception_ptr> errors(threads);
	std::vector<std::thread> workers;
	for (std::size_t w = 0; w < threads; ++w)
		workers.emplace_back([&, w] {
			try {
				for (std::size_t i = w; i < count; i += threads)
					body(i);
			} catch (...) {
				errors[w] = std::current_exception();
			}
		});
	for (auto& t : workers)
		t.join();
	for (auto& e : errors)
		if (e)
			std::rethrow_exception(e);
}

} // namespace ctpglm
