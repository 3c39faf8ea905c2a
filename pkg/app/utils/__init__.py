"""Utility-Module"""
