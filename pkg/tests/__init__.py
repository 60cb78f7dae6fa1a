"""Test scripts for contact-hj components."""
