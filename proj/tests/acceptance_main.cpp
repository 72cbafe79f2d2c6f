#include "wbary/acceptance.hpp"

#include <iostream>

int main() {
    wbary::AcceptanceOptions opts;
    return wbary::acceptance_exit_code(wbary::run_acceptance(opts, std::cout));
}
