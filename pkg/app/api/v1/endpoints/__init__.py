# This file makes the endpoints directory a package
