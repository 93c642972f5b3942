#pragma once

#include "rulescreen/error.hpp"

#include <gtest/gtest.h>

// Expects `stmt` to throw a rulescreen::Error carrying `errc`.
#define EXPECT_ERRC(stmt, errc)                                                                                        \
    do {                                                                                                               \
        try {                                                                                                          \
            stmt;                                                                                                      \
            ADD_FAILURE() << "no error from " #stmt;                                                                   \
        } catch (const rulescreen::Error& e_) {                                                                        \
            EXPECT_EQ(e_.code(), errc) << e_.what();                                                                   \
        }                                                                                                              \
    } while (0)
